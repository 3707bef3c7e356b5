import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import Ajv from "ajv";
import { afterAll, describe, expect, it } from "vitest";

import { renderExchangeLine, writePredictions } from "../src/exchange.js";

// The evaluator ships the schema its reader enforces; validate against
// that exact document rather than a local copy.
const SCHEMA_PATH = fileURLToPath(
  new URL("../../src/cotox/assets/exchange.schema.json", import.meta.url)
);

const tempDirs: string[] = [];
afterAll(() => {
  for (const dir of tempDirs) rmSync(dir, { recursive: true, force: true });
});

describe("renderExchangeLine", () => {
  it("matches the evaluator's serialization byte for byte", () => {
    const line = renderExchangeLine({
      compoundId: "X1",
      verdicts: [true, false, true, false, true, false],
      warnings: ["a b"],
    });
    expect(line).toBe(
      '{"compound_id": "X1", "answers": {"cardio": "Toxic", ' +
        '"hemato": "Non-toxic", "infertility": "Toxic", ' +
        '"liver": "Non-toxic", "pulmonary": "Toxic", ' +
        '"renal": "Non-toxic"}, "warnings": ["a b"]}'
    );
  });

  it("renders empty warnings as a bare array", () => {
    const line = renderExchangeLine({
      compoundId: "X2",
      verdicts: [false, false, false, false, false, false],
      warnings: [],
    });
    expect(line.endsWith('"warnings": []}')).toBe(true);
  });

  it("escapes quotes and backslashes inside strings", () => {
    const line = renderExchangeLine({
      compoundId: 'a"b\\c',
      verdicts: [false, false, false, false, false, false],
      warnings: ['say "hi"'],
    });
    const parsed = JSON.parse(line);
    expect(parsed.compound_id).toBe('a"b\\c');
    expect(parsed.warnings).toEqual(['say "hi"']);
  });

  it("refuses the wrong number of verdicts", () => {
    expect(() =>
      renderExchangeLine({ compoundId: "X", verdicts: [true], warnings: [] })
    ).toThrow(/6 verdicts/);
  });

  it("produces lines that satisfy the exchange schema", () => {
    const ajv = new Ajv();
    const validate = ajv.compile(
      JSON.parse(readFileSync(SCHEMA_PATH, "utf-8"))
    );
    const line = renderExchangeLine({
      compoundId: "X3",
      verdicts: [true, true, false, false, true, false],
      warnings: ["cardio: training labels are single-class, defaulting to Non-toxic"],
    });
    const ok = validate(JSON.parse(line));
    expect(validate.errors ?? []).toEqual([]);
    expect(ok).toBe(true);
  });
});

describe("writePredictions", () => {
  it("writes newline-terminated JSONL", () => {
    const dir = mkdtempSync(join(tmpdir(), "exchange-"));
    tempDirs.push(dir);
    const out = join(dir, "predictions.jsonl");
    const records = [
      {
        compoundId: "A1",
        verdicts: [true, false, false, false, false, false],
        warnings: [],
      },
      {
        compoundId: "A2",
        verdicts: [false, false, false, false, false, true],
        warnings: [],
      },
    ];
    writePredictions(out, records);
    const body = readFileSync(out, "utf-8");
    expect(body.endsWith("\n")).toBe(true);
    const lines = body.slice(0, -1).split("\n");
    expect(lines).toHaveLength(2);
    expect(lines.map((l) => JSON.parse(l).compound_id)).toEqual(["A1", "A2"]);
  });
});
