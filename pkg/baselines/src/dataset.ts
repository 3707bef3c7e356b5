// CSV ingestion and featurization for the baseline trainer.

import { readFileSync } from "node:fs";
import Papa from "papaparse";

import { fingerprint } from "./fingerprint.js";
import { parseSmiles } from "./smiles.js";

export class SchemaViolationError extends Error {}
export class AllInvalidError extends Error {}

/** short toxicity keys, in the exchange-format order */
export const TOXICITY_TYPES = [
  "cardio",
  "hemato",
  "infertility",
  "liver",
  "pulmonary",
  "renal",
] as const;
export type ToxicityKey = (typeof TOXICITY_TYPES)[number];

export interface LabeledCompound {
  compoundId: string;
  /** toxic flag per type, exchange order */
  labels: boolean[];
}

export interface SmilesRecord {
  compoundId: string;
  smiles: string;
}

export interface FeatureMatrix {
  compoundIds: string[];
  features: Uint8Array[];
  /** compound ids whose SMILES failed to parse, input order */
  dropped: string[];
}

function parseCsv(path: string): Record<string, string>[] {
  const text = readFileSync(path, "utf-8");
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0]!;
    throw new SchemaViolationError(
      `${path}: row ${first.row}: ${first.message}`
    );
  }
  return parsed.data;
}

function requireField(
  row: Record<string, string>,
  field: string,
  path: string,
  rowIndex: number
): string {
  const value = row[field];
  if (value === undefined || value.trim() === "") {
    throw new SchemaViolationError(
      `${path}: row ${rowIndex + 1}: missing ${field}`
    );
  }
  return value.trim();
}

/**
 * Labels CSV: compound_id, name (ignored), then one Toxic/Non-toxic
 * column per type (cardio..renal). Same layout the evaluator consumes.
 */
export function loadLabelsCsv(path: string): LabeledCompound[] {
  const rows = parseCsv(path);
  if (rows.length === 0) throw new SchemaViolationError(`${path}: no rows`);
  const out: LabeledCompound[] = [];
  const seen = new Set<string>();
  rows.forEach((row, i) => {
    const compoundId = requireField(row, "compound_id", path, i);
    if (seen.has(compoundId)) {
      throw new SchemaViolationError(`${path}: duplicate id ${compoundId}`);
    }
    seen.add(compoundId);
    const labels = TOXICITY_TYPES.map((key) => {
      const cell = requireField(row, key, path, i);
      if (cell === "Toxic") return true;
      if (cell === "Non-toxic") return false;
      throw new SchemaViolationError(
        `${path}: row ${i + 1}: bad verdict '${cell}' for ${key}`
      );
    });
    out.push({ compoundId, labels });
  });
  return out;
}

/** SMILES CSV: compound_id, smiles. */
export function loadSmilesCsv(path: string): SmilesRecord[] {
  const rows = parseCsv(path);
  if (rows.length === 0) throw new SchemaViolationError(`${path}: no rows`);
  const out: SmilesRecord[] = [];
  const seen = new Set<string>();
  rows.forEach((row, i) => {
    const compoundId = requireField(row, "compound_id", path, i);
    if (seen.has(compoundId)) {
      throw new SchemaViolationError(`${path}: duplicate id ${compoundId}`);
    }
    seen.add(compoundId);
    out.push({ compoundId, smiles: requireField(row, "smiles", path, i) });
  });
  return out;
}

/**
 * Fingerprint every parsable record; unparsable SMILES are dropped and
 * reported, never fatal unless nothing survives.
 */
export function featurize(records: SmilesRecord[]): FeatureMatrix {
  const compoundIds: string[] = [];
  const features: Uint8Array[] = [];
  const dropped: string[] = [];
  for (const record of records) {
    try {
      features.push(fingerprint(parseSmiles(record.smiles)));
      compoundIds.push(record.compoundId);
    } catch {
      dropped.push(record.compoundId);
    }
  }
  if (compoundIds.length === 0) {
    throw new AllInvalidError("no compound has a parsable SMILES");
  }
  return { compoundIds, features, dropped };
}
