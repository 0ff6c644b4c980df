/**
 * Readers for mfwlab run artifact directories.
 *
 * An artifact directory contains config.resolved.json, metrics.csv
 * (long format: one row per epoch/class/split) and optional
 * features_train.csv / features_test.csv dumps.
 */

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";
import { join } from "node:path";

export const METRICS_COLUMNS = [
  "epoch",
  "class",
  "split",
  "accuracy",
  "ratio",
  "grad_norm",
  "deviation",
  "loss",
] as const;

export interface MetricsRow {
  epoch: number;
  cls: number;
  split: "train" | "test";
  accuracy: number;
  ratio: number | null;
  grad_norm: number | null;
  deviation: number | null;
  loss: number | null;
}

export interface FeatureRow {
  label: number;
  coords: number[];
}

export interface Artifact {
  dir: string;
  config: Record<string, any>;
  configHash: string;
  mode: string;
  rows: MetricsRow[];
  numClasses: number;
}

function parseCell(cell: string): number | null {
  if (cell === "") return null;
  const v = Number(cell);
  if (Number.isNaN(v)) throw new Error(`metrics.csv: non-numeric cell ${JSON.stringify(cell)}`);
  return v;
}

export function parseMetricsCsv(text: string): MetricsRow[] {
  const lines = text.trim().split("\n");
  const header = lines[0].split(",");
  for (const col of METRICS_COLUMNS) {
    if (!header.includes(col)) {
      throw new Error(`metrics.csv schema mismatch: missing column ${JSON.stringify(col)}`);
    }
  }
  const idx = Object.fromEntries(header.map((name, i) => [name, i]));
  return lines.slice(1).map((line) => {
    const cells = line.split(",");
    const split = cells[idx.split];
    if (split !== "train" && split !== "test") {
      throw new Error(`metrics.csv: unknown split ${JSON.stringify(split)}`);
    }
    return {
      epoch: Number(cells[idx.epoch]),
      cls: Number(cells[idx.class]),
      split,
      accuracy: Number(cells[idx.accuracy]),
      ratio: parseCell(cells[idx.ratio]),
      grad_norm: parseCell(cells[idx.grad_norm]),
      deviation: parseCell(cells[idx.deviation]),
      loss: parseCell(cells[idx.loss]),
    };
  });
}

export function parseFeaturesCsv(text: string): FeatureRow[] {
  const lines = text.trim().split("\n");
  const header = lines[0].split(",");
  if (header[0] !== "label") {
    throw new Error(`features csv schema mismatch: missing column "label"`);
  }
  return lines.slice(1).map((line) => {
    const cells = line.split(",").map(Number);
    return { label: cells[0], coords: cells.slice(1) };
  });
}

export function loadArtifact(dir: string): Artifact {
  const configText = readFileSync(join(dir, "config.resolved.json"), "utf8");
  const config = JSON.parse(configText);
  const rows = parseMetricsCsv(readFileSync(join(dir, "metrics.csv"), "utf8"));
  const numClasses = Math.max(...rows.map((r) => r.cls)) + 1;
  return {
    dir,
    config,
    configHash: createHash("sha256").update(configText).digest("hex").slice(0, 12),
    mode: config.train?.mode ?? "?",
    rows,
    numClasses,
  };
}

export function loadFeatures(dir: string, split: "train" | "test"): FeatureRow[] {
  return parseFeaturesCsv(readFileSync(join(dir, `features_${split}.csv`), "utf8"));
}

export function featureDim(artifact: Artifact): number {
  const widths = artifact.config.model?.layer_widths ?? [];
  if (widths.length > 0) return widths[widths.length - 1];
  return artifact.config.dataset?.dim ?? NaN;
}
