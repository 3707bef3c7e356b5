#!/usr/bin/env node
// Command-line entry point: baselines train-predict ...

import { parseArgs } from "node:util";

import { AllInvalidError, SchemaViolationError } from "./dataset.js";
import { InvalidSmilesError } from "./smiles.js";
import {
  NoTestCompoundsError,
  runTrainPredict,
  writePredictions,
} from "./train-predict.js";

const USAGE =
  "usage: baselines train-predict --labels <csv> --smiles <csv> " +
  "--out predictions.jsonl [--seed <n>]";

function fail(code: number, message: string): never {
  process.stderr.write(message + "\n");
  process.exit(code);
}

export function main(argv: string[]): void {
  const command = argv[0];
  if (command === undefined || command === "--help" || command === "-h") {
    fail(command === undefined ? 1 : 0, USAGE);
  }
  if (command !== "train-predict") {
    fail(1, `unknown command '${command}'\n${USAGE}`);
  }
  let values;
  try {
    ({ values } = parseArgs({
      args: argv.slice(1),
      options: {
        labels: { type: "string" },
        smiles: { type: "string" },
        out: { type: "string" },
        seed: { type: "string", default: "0" },
      },
    }));
  } catch (err) {
    fail(1, `${(err as Error).message}\n${USAGE}`);
  }
  const { labels, smiles, out } = values;
  if (labels === undefined || smiles === undefined || out === undefined) {
    fail(1, USAGE);
  }
  const seed = Number(values.seed);
  if (!Number.isInteger(seed) || seed < 0) {
    fail(1, `--seed must be a non-negative integer, got '${values.seed}'`);
  }

  try {
    const result = runTrainPredict(labels, smiles, seed);
    for (const id of result.dropped) {
      process.stderr.write(`dropped (unparsable SMILES): ${id}\n`);
    }
    for (const warning of result.typeWarnings) {
      process.stderr.write(`warning: ${warning}\n`);
    }
    writePredictions(out, result.records);
    process.stderr.write(
      `wrote ${result.records.length} predictions to ${out}\n`
    );
  } catch (err) {
    if (
      err instanceof SchemaViolationError ||
      err instanceof AllInvalidError ||
      err instanceof NoTestCompoundsError ||
      err instanceof InvalidSmilesError ||
      (err as NodeJS.ErrnoException).code === "ENOENT"
    ) {
      fail(2, `error: ${(err as Error).message}`);
    }
    throw err;
  }
}

main(process.argv.slice(2));
