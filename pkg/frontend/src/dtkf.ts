import * as fs from "node:fs";

const MAGIC = "DTKF";
const VERSION = 1;

/**
 * Serialize a frame matrix to the toolkit's binary feature format:
 * "DTKF", uint32 version, uint32 n_frames, uint32 dim (all little-endian),
 * then row-major float32 payload.
 */
export function encodeFeatures(frames: number, dim: number, data: Float32Array): Buffer {
  if (frames < 1 || dim < 1) {
    throw new Error(`feature matrix must be non-empty (got ${frames}x${dim})`);
  }
  if (data.length !== frames * dim) {
    throw new Error(`payload length ${data.length} != ${frames}x${dim}`);
  }
  for (const v of data) {
    if (!Number.isFinite(v)) {
      throw new Error("non-finite value in feature matrix");
    }
  }
  const buf = Buffer.alloc(16 + 4 * data.length);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(VERSION, 4);
  buf.writeUInt32LE(frames, 8);
  buf.writeUInt32LE(dim, 12);
  for (let i = 0; i < data.length; i++) {
    buf.writeFloatLE(data[i], 16 + 4 * i);
  }
  return buf;
}

export function writeFeatures(path: string, frames: number, dim: number, data: Float32Array): void {
  fs.writeFileSync(path, encodeFeatures(frames, dim, data));
}

/** Read-back used only by tests; the primary toolkit is the real consumer. */
export function readFeatures(path: string): { frames: number; dim: number; data: Float32Array } {
  const buf = fs.readFileSync(path);
  if (buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error(`${path}: bad magic`);
  }
  if (buf.readUInt32LE(4) !== VERSION) {
    throw new Error(`${path}: unsupported version`);
  }
  const frames = buf.readUInt32LE(8);
  const dim = buf.readUInt32LE(12);
  if (buf.length !== 16 + 4 * frames * dim) {
    throw new Error(`${path}: truncated payload`);
  }
  const data = new Float32Array(frames * dim);
  for (let i = 0; i < data.length; i++) {
    data[i] = buf.readFloatLE(16 + 4 * i);
  }
  return { frames, dim, data };
}
