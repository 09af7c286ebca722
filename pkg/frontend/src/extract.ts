import * as fs from "node:fs";
import * as path from "node:path";
import { parseArgs } from "node:util";

import { extractFeatures, getModel } from "./features";
import { writeFeatures } from "./dtkf";
import { manifestLine, MetadataError, readMetadata } from "./metadata";
import { readWav, WavDecodeError } from "./wav";

const USAGE =
  "usage: extract --audio-dir DIR --out-dir DIR --model NAME --layer N --metadata FILE";

export interface ExtractionResult {
  written: string[];
  skipped: { file: string; reason: string }[];
}

/**
 * Extract features for every .wav in audioDir and write one feature file
 * per clip plus manifest.jsonl into outDir. Undecodable audio is skipped
 * (reported in the result and the extraction.json sidecar); a decodable
 * clip without a metadata row is fatal.
 */
export function runExtraction(
  audioDir: string,
  outDir: string,
  modelName: string,
  layer: number,
  metadataPath: string,
  warn: (msg: string) => void = (msg) => process.stderr.write(msg + "\n"),
): ExtractionResult {
  const model = getModel(modelName);
  if (!Number.isInteger(layer) || layer < 1 || layer > model.layers) {
    throw new Error(`layer ${layer} out of range for ${model.name} (1..${model.layers})`);
  }
  const metadata = readMetadata(metadataPath);
  const wavs = fs
    .readdirSync(audioDir)
    .filter((f) => f.toLowerCase().endsWith(".wav"))
    .sort();

  fs.mkdirSync(outDir, { recursive: true });
  const lines: string[] = [];
  const written: string[] = [];
  const skipped: { file: string; reason: string }[] = [];

  if (wavs.length === 0) {
    warn(`warning: no .wav files in ${audioDir}; writing an empty manifest`);
  }
  for (const file of wavs) {
    const utteranceId = file.slice(0, -".wav".length);
    let clip;
    try {
      clip = readWav(path.join(audioDir, file));
    } catch (err) {
      if (err instanceof WavDecodeError) {
        warn(`warning: skipping undecodable ${file}: ${err.message}`);
        skipped.push({ file, reason: err.message });
        continue;
      }
      throw err;
    }
    const row = metadata.get(utteranceId);
    if (!row) {
      throw new MetadataError(`no metadata row for '${utteranceId}' (${file})`);
    }
    const feats = extractFeatures(clip, model, layer);
    const featureFile = `${utteranceId}.dtkf`;
    writeFeatures(path.join(outDir, featureFile), feats.frames, feats.dim, feats.data);
    lines.push(manifestLine(row, featureFile));
    written.push(featureFile);
  }

  fs.writeFileSync(path.join(outDir, "manifest.jsonl"), lines.map((l) => l + "\n").join(""));
  fs.writeFileSync(
    path.join(outDir, "extraction.json"),
    JSON.stringify(
      {
        model: model.name,
        layer,
        hidden_size: model.hiddenSize,
        input_rate_hz: model.inputRate,
        frame_rate_hz: model.frameRateHz,
        skipped,
      },
      null,
      1,
    ) + "\n",
  );
  return { written, skipped };
}

export function main(argv: string[]): number {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        "audio-dir": { type: "string" },
        "out-dir": { type: "string" },
        model: { type: "string" },
        layer: { type: "string" },
        metadata: { type: "string" },
      },
    }));
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n${USAGE}\n`);
    return 1;
  }
  const audioDir = values["audio-dir"];
  const outDir = values["out-dir"];
  const { model, layer, metadata } = values;
  if (!audioDir || !outDir || !model || !layer || !metadata) {
    process.stderr.write(USAGE + "\n");
    return 1;
  }
  try {
    const result = runExtraction(audioDir, outDir, model, Number(layer), metadata);
    process.stdout.write(
      `wrote ${result.written.length} feature file(s) to ${outDir}` +
        (result.skipped.length ? `, skipped ${result.skipped.length}` : "") +
        "\n",
    );
    return 0;
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 2;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
