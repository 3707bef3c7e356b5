// Prediction exchange lines, byte-compatible with the evaluator's reader.

import { renameSync, writeFileSync } from "node:fs";

import { TOXICITY_TYPES } from "./dataset.js";

export interface PredictionRecord {
  compoundId: string;
  /** toxic flag per type, exchange order */
  verdicts: boolean[];
  warnings: string[];
}

/**
 * One JSON line: object keys in fixed order, ", " between entries and
 * ": " after keys, so identical predictions are identical bytes no
 * matter which tool emitted them.
 */
export function renderExchangeLine(record: PredictionRecord): string {
  if (record.verdicts.length !== TOXICITY_TYPES.length) {
    throw new Error(`expected ${TOXICITY_TYPES.length} verdicts`);
  }
  const answers = TOXICITY_TYPES.map(
    (key, i) =>
      `${JSON.stringify(key)}: ${JSON.stringify(
        record.verdicts[i] ? "Toxic" : "Non-toxic"
      )}`
  ).join(", ");
  const warnings = record.warnings.map((w) => JSON.stringify(w)).join(", ");
  return (
    `{"compound_id": ${JSON.stringify(record.compoundId)}, ` +
    `"answers": {${answers}}, "warnings": [${warnings}]}`
  );
}

/** Atomic write: temp file in the same directory, then rename over. */
export function writePredictions(
  path: string,
  records: PredictionRecord[]
): void {
  const body = records.map((r) => renderExchangeLine(r) + "\n").join("");
  const tmp = `${path}.tmp`;
  writeFileSync(tmp, body, "utf-8");
  renameSync(tmp, path);
}
