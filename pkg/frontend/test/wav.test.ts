import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { readWav, resample, WavDecodeError } from "../src/wav";
import { sine, writeWav } from "./helpers";

let dir: string;
beforeEach(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "wav-"));
});
afterEach(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

describe("readWav", () => {
  it("round-trips mono PCM16", () => {
    const p = path.join(dir, "a.wav");
    writeWav(p, sine(440, 0.1));
    const clip = readWav(p);
    expect(clip.sampleRate).toBe(16000);
    expect(clip.samples.length).toBe(1600);
    expect(Math.max(...clip.samples)).toBeGreaterThan(0.4);
    expect(Math.max(...clip.samples)).toBeLessThanOrEqual(1.0);
  });

  it("downmixes stereo to mono", () => {
    const p = path.join(dir, "st.wav");
    // interleaved L/R: L = 0.5, R = -0.5 -> mono ~ 0
    const inter: number[] = [];
    for (let i = 0; i < 100; i++) inter.push(0.5, -0.5);
    writeWav(p, inter, 16000, 2);
    const clip = readWav(p);
    expect(clip.samples.length).toBe(100);
    for (const s of clip.samples) expect(Math.abs(s)).toBeLessThan(1e-4);
  });

  it("rejects non-WAV bytes", () => {
    const p = path.join(dir, "junk.wav");
    fs.writeFileSync(p, Buffer.from("definitely not audio data, padded out to 44+ bytes...."));
    expect(() => readWav(p)).toThrow(WavDecodeError);
  });

  it("rejects truncated files", () => {
    const p = path.join(dir, "short.wav");
    fs.writeFileSync(p, Buffer.from("RIFF"));
    expect(() => readWav(p)).toThrow(WavDecodeError);
  });
});

describe("resample", () => {
  it("is identity at matching rate", () => {
    const clip = { sampleRate: 16000, samples: new Float32Array([1, 2, 3]) };
    expect(resample(clip, 16000)).toBe(clip);
  });

  it("halves sample count when downsampling 2x", () => {
    const clip = { sampleRate: 32000, samples: new Float32Array(3200) };
    expect(resample(clip, 16000).samples.length).toBe(1600);
  });

  it("preserves a constant signal", () => {
    const clip = { sampleRate: 44100, samples: new Float32Array(4410).fill(0.25) };
    const out = resample(clip, 16000);
    expect(out.sampleRate).toBe(16000);
    for (const s of out.samples) expect(s).toBeCloseTo(0.25, 6);
  });
});
