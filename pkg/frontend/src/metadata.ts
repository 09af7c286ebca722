import * as fs from "node:fs";

export interface MetadataRow {
  utterance_id: string;
  speaker_id: string;
  native_language: string;
  spoken_language: string;
  sentence_id: string;
  transcript: string;
  accent_strength: number;
}

const COLUMNS = [
  "utterance_id",
  "speaker_id",
  "native_language",
  "spoken_language",
  "sentence_id",
  "transcript",
  "accent_strength",
] as const;

export class MetadataError extends Error {}

/** Parse the tab-separated sidecar table, keyed by utterance id. */
export function readMetadata(path: string): Map<string, MetadataRow> {
  const lines = fs.readFileSync(path, "utf-8").split("\n").filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new MetadataError(`${path}: empty metadata file`);
  }
  const header = lines[0].split("\t");
  if (header.length !== COLUMNS.length || COLUMNS.some((c, i) => header[i] !== c)) {
    throw new MetadataError(
      `${path}: header must be exactly: ${COLUMNS.join(", ")} (got: ${header.join(", ")})`,
    );
  }
  const rows = new Map<string, MetadataRow>();
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split("\t");
    if (cells.length !== COLUMNS.length) {
      throw new MetadataError(`${path}:${i + 1}: expected ${COLUMNS.length} columns, got ${cells.length}`);
    }
    const alpha = Number(cells[6]);
    if (!Number.isFinite(alpha) || alpha < 0 || alpha > 1) {
      throw new MetadataError(`${path}:${i + 1}: accent_strength must be in [0, 1]`);
    }
    const row: MetadataRow = {
      utterance_id: cells[0],
      speaker_id: cells[1],
      native_language: cells[2],
      spoken_language: cells[3],
      sentence_id: cells[4],
      transcript: cells[5],
      accent_strength: alpha,
    };
    if (rows.has(row.utterance_id)) {
      throw new MetadataError(`${path}:${i + 1}: duplicate utterance_id '${row.utterance_id}'`);
    }
    rows.set(row.utterance_id, row);
  }
  return rows;
}

/** One manifest line in the toolkit's JSONL schema. */
export function manifestLine(row: MetadataRow, featurePath: string): string {
  return JSON.stringify({
    utterance_id: row.utterance_id,
    speaker_id: row.speaker_id,
    native_language: row.native_language,
    spoken_language: row.spoken_language,
    sentence_id: row.sentence_id,
    transcript: row.transcript,
    accent_strength: row.accent_strength,
    feature_path: featurePath,
  });
}
