import * as fs from "node:fs";

export interface AudioClip {
  sampleRate: number;
  samples: Float32Array; // mono, normalized to [-1, 1]
}

export class WavDecodeError extends Error {}

/**
 * Minimal RIFF/WAVE reader: PCM16 only, any sample rate, any channel
 * count (channels are averaged down to mono).
 */
export function readWav(path: string): AudioClip {
  const buf = fs.readFileSync(path);
  if (buf.length < 44) {
    throw new WavDecodeError(`${path}: too short for a WAV header`);
  }
  if (buf.toString("ascii", 0, 4) !== "RIFF" || buf.toString("ascii", 8, 12) !== "WAVE") {
    throw new WavDecodeError(`${path}: not a RIFF/WAVE file`);
  }

  let fmt: { channels: number; sampleRate: number; bitsPerSample: number; format: number } | null = null;
  let data: Buffer | null = null;
  let off = 12;
  while (off + 8 <= buf.length) {
    const id = buf.toString("ascii", off, off + 4);
    const size = buf.readUInt32LE(off + 4);
    const body = off + 8;
    if (body + size > buf.length) {
      throw new WavDecodeError(`${path}: chunk '${id}' overruns the file`);
    }
    if (id === "fmt ") {
      fmt = {
        format: buf.readUInt16LE(body),
        channels: buf.readUInt16LE(body + 2),
        sampleRate: buf.readUInt32LE(body + 4),
        bitsPerSample: buf.readUInt16LE(body + 14),
      };
    } else if (id === "data") {
      data = buf.subarray(body, body + size);
    }
    off = body + size + (size % 2); // chunks are word-aligned
  }

  if (fmt === null || data === null) {
    throw new WavDecodeError(`${path}: missing fmt or data chunk`);
  }
  if (fmt.format !== 1 || fmt.bitsPerSample !== 16) {
    throw new WavDecodeError(
      `${path}: only PCM16 is supported (format ${fmt.format}, ${fmt.bitsPerSample} bits)`,
    );
  }
  if (fmt.channels < 1 || fmt.sampleRate < 1) {
    throw new WavDecodeError(`${path}: nonsense fmt chunk`);
  }

  const frames = Math.floor(data.length / (2 * fmt.channels));
  if (frames === 0) {
    throw new WavDecodeError(`${path}: empty data chunk`);
  }
  const samples = new Float32Array(frames);
  for (let i = 0; i < frames; i++) {
    let acc = 0;
    for (let c = 0; c < fmt.channels; c++) {
      acc += data.readInt16LE((i * fmt.channels + c) * 2);
    }
    samples[i] = acc / fmt.channels / 32768;
  }
  return { sampleRate: fmt.sampleRate, samples };
}

/** Linear-interpolation resampler; identity when rates already match. */
export function resample(clip: AudioClip, targetRate: number): AudioClip {
  if (clip.sampleRate === targetRate) {
    return clip;
  }
  const ratio = clip.sampleRate / targetRate;
  const n = Math.max(1, Math.floor(clip.samples.length / ratio));
  const out = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    const pos = i * ratio;
    const lo = Math.floor(pos);
    const hi = Math.min(lo + 1, clip.samples.length - 1);
    const frac = pos - lo;
    out[i] = clip.samples[lo] * (1 - frac) + clip.samples[hi] * frac;
  }
  return { sampleRate: targetRate, samples: out };
}
