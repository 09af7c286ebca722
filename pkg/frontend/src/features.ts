import { AudioClip, resample } from "./wav";

export interface ModelProfile {
  name: string;
  inputRate: number; // Hz expected at the model input
  frameRateHz: number; // output frames per second
  windowSamples: number;
  hopSamples: number;
  bands: number; // spectral bands before projection
  hiddenSize: number; // output dim
  layers: number; // valid layer indices are 1..layers
}

export const MODELS: Record<string, ModelProfile> = {
  "dsp-base": {
    name: "dsp-base",
    inputRate: 16000,
    frameRateHz: 50,
    windowSamples: 400, // 25 ms
    hopSamples: 320, // 20 ms
    bands: 64,
    hiddenSize: 768,
    layers: 12,
  },
};

export function getModel(name: string): ModelProfile {
  const model = MODELS[name];
  if (!model) {
    throw new Error(`unknown model '${name}' (have: ${Object.keys(MODELS).join(", ")})`);
  }
  return model;
}

/** Deterministic 32-bit PRNG (mulberry32) so projections are reproducible. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** Per-layer projection matrix, hiddenSize x bands, fixed by (model, layer). */
export function projectionMatrix(model: ModelProfile, layer: number): Float64Array {
  const rand = mulberry32(fnv1a(`${model.name}/layer${layer}`));
  const w = new Float64Array(model.hiddenSize * model.bands);
  const scale = 1 / Math.sqrt(model.bands);
  for (let i = 0; i < w.length; i++) {
    w[i] = (2 * rand() - 1) * scale;
  }
  return w;
}

/** Log band energies via per-band Goertzel-style DFT probes. */
export function bandEnergies(frame: Float32Array, bands: number): Float64Array {
  const out = new Float64Array(bands);
  const n = frame.length;
  for (let b = 0; b < bands; b++) {
    // band center frequencies spread evenly up to Nyquist
    const omega = (Math.PI * (b + 1)) / (bands + 1);
    let re = 0;
    let im = 0;
    for (let t = 0; t < n; t++) {
      re += frame[t] * Math.cos(omega * t);
      im -= frame[t] * Math.sin(omega * t);
    }
    out[b] = Math.log1p(Math.hypot(re, im));
  }
  return out;
}

/**
 * Extract hidden-layer features for one clip: resample to the model rate,
 * frame, band-analyze, then project each frame through the layer's fixed
 * matrix with a tanh nonlinearity. Rows are frames, dim = hiddenSize.
 */
export function extractFeatures(
  clip: AudioClip,
  model: ModelProfile,
  layer: number,
): { frames: number; dim: number; data: Float32Array } {
  if (!Number.isInteger(layer) || layer < 1 || layer > model.layers) {
    throw new Error(`layer ${layer} out of range for ${model.name} (1..${model.layers})`);
  }
  const audio = resample(clip, model.inputRate);
  let samples = audio.samples;
  if (samples.length < model.windowSamples) {
    const padded = new Float32Array(model.windowSamples);
    padded.set(samples);
    samples = padded;
  }
  const nFrames = 1 + Math.floor((samples.length - model.windowSamples) / model.hopSamples);
  const w = projectionMatrix(model, layer);
  const data = new Float32Array(nFrames * model.hiddenSize);
  for (let f = 0; f < nFrames; f++) {
    const start = f * model.hopSamples;
    const energies = bandEnergies(
      samples.subarray(start, start + model.windowSamples),
      model.bands,
    );
    for (let i = 0; i < model.hiddenSize; i++) {
      let acc = 0;
      const row = i * model.bands;
      for (let b = 0; b < model.bands; b++) {
        acc += w[row + b] * energies[b];
      }
      data[f * model.hiddenSize + i] = Math.tanh(acc);
    }
  }
  return { frames: nFrames, dim: model.hiddenSize, data };
}
