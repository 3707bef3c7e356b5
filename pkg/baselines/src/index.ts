export { parseSmiles, InvalidSmilesError } from "./smiles.js";
export type { Molecule } from "./smiles.js";
export { fingerprint, FP_BITS, FP_RADIUS } from "./fingerprint.js";
export { trainBooster, predictMargin, predictToxic } from "./boosting.js";
export type { BoosterModel, BoosterOptions } from "./boosting.js";
export {
  TOXICITY_TYPES,
  loadLabelsCsv,
  loadSmilesCsv,
  featurize,
  SchemaViolationError,
  AllInvalidError,
} from "./dataset.js";
export type {
  ToxicityKey,
  LabeledCompound,
  SmilesRecord,
  FeatureMatrix,
} from "./dataset.js";
export { renderExchangeLine, writePredictions } from "./exchange.js";
export type { PredictionRecord } from "./exchange.js";
export { runTrainPredict, NoTestCompoundsError } from "./train-predict.js";
export type { TrainPredictResult } from "./train-predict.js";
