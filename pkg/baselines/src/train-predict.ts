// Per-type fingerprint classifiers over a labeled/unlabeled CSV pair.

import { BoosterModel, predictToxic, trainBooster } from "./boosting.js";
import {
  FeatureMatrix,
  LabeledCompound,
  TOXICITY_TYPES,
  featurize,
  loadLabelsCsv,
  loadSmilesCsv,
} from "./dataset.js";
import { PredictionRecord, writePredictions } from "./exchange.js";

export class NoTestCompoundsError extends Error {}

export interface TrainPredictResult {
  records: PredictionRecord[];
  /** compound ids dropped for unparsable SMILES, input order */
  dropped: string[];
  /** one message per degenerate type, exchange order */
  typeWarnings: string[];
}

interface TypeOutcome {
  verdicts: boolean[];
  warning: string | null;
}

function fitOne(
  features: Uint8Array[],
  labels: number[],
  testFeatures: Uint8Array[],
  type: string,
  seed: number
): TypeOutcome {
  const positives = labels.reduce((acc, y) => acc + y, 0);
  if (positives === 0 || positives === labels.length) {
    return {
      verdicts: testFeatures.map(() => false),
      warning: `${type}: training labels are single-class, defaulting to Non-toxic`,
    };
  }
  const model: BoosterModel = trainBooster(features, labels, { seed });
  if (model.stumps.length === 0) {
    // Nothing separated the classes; the bias alone is the majority vote.
    return {
      verdicts: testFeatures.map(() => model.bias > 0),
      warning: `${type}: no informative split found, defaulting to majority class`,
    };
  }
  return {
    verdicts: testFeatures.map((row) => predictToxic(model, row)),
    warning: null,
  };
}

/**
 * Train one classifier per toxicity type on the labeled compounds and
 * predict every compound that appears in the SMILES file but not in the
 * labels file. Output records are sorted by compound id.
 */
export function runTrainPredict(
  labelsPath: string,
  smilesPath: string,
  seed: number
): TrainPredictResult {
  const labeled = loadLabelsCsv(labelsPath);
  const matrix: FeatureMatrix = featurize(loadSmilesCsv(smilesPath));

  const labelById = new Map<string, LabeledCompound>(
    labeled.map((c) => [c.compoundId, c])
  );
  const trainRows: Uint8Array[] = [];
  const trainCompounds: LabeledCompound[] = [];
  const testIds: string[] = [];
  const testRows: Uint8Array[] = [];
  matrix.compoundIds.forEach((id, i) => {
    const entry = labelById.get(id);
    if (entry !== undefined) {
      trainRows.push(matrix.features[i]!);
      trainCompounds.push(entry);
    } else {
      testIds.push(id);
      testRows.push(matrix.features[i]!);
    }
  });
  if (testRows.length === 0) {
    throw new NoTestCompoundsError(
      "every SMILES row is labeled; nothing to predict"
    );
  }
  if (trainRows.length === 0) {
    throw new NoTestCompoundsError("no labeled SMILES rows to train on");
  }

  const perType: TypeOutcome[] = TOXICITY_TYPES.map((type, t) =>
    fitOne(
      trainRows,
      trainCompounds.map((c) => (c.labels[t] ? 1 : 0)),
      testRows,
      type,
      seed
    )
  );
  const typeWarnings = perType
    .map((o) => o.warning)
    .filter((w): w is string => w !== null);

  const records: PredictionRecord[] = testIds
    .map((compoundId, i) => ({
      compoundId,
      verdicts: perType.map((o) => o.verdicts[i]!),
      warnings: typeWarnings,
    }))
    .sort((a, b) => (a.compoundId < b.compoundId ? -1 : 1));
  return { records, dropped: matrix.dropped, typeWarnings };
}

export { writePredictions };
