/**
 * Turns run artifacts into the five figure types: per-class accuracy
 * curves, classification-ratio curves, gradient-norm curves, feature
 * deviation curves, and final 2-D feature scatters.
 */

import { writeFileSync } from "node:fs";

import {
  Artifact,
  featureDim,
  loadArtifact,
  loadFeatures,
  MetricsRow,
} from "./artifact.js";
import { Figure, Panel, renderFigure, ScatterGroup, Series } from "./svg.js";

export const METRIC_NAMES = ["accuracy", "ratio", "grad_norm", "deviation", "features"] as const;
export type MetricName = (typeof METRIC_NAMES)[number];

export interface PlotSpec {
  artifactDirs: string[];
  metric: MetricName;
  classes?: number[];
  output: string;
}

const Y_LABELS: Record<Exclude<MetricName, "features">, string> = {
  accuracy: "train accuracy",
  ratio: "classification ratio",
  grad_norm: "per-class grad norm",
  deviation: "feature deviation",
};

function classList(artifact: Artifact, filter?: number[]): number[] {
  const all = Array.from({ length: artifact.numClasses }, (_, c) => c);
  if (!filter || filter.length === 0) return all;
  for (const c of filter) {
    if (!all.includes(c)) {
      throw new Error(`class ${c} not present in artifact (has ${artifact.numClasses} classes)`);
    }
  }
  return filter;
}

function curveValue(row: MetricsRow, metric: Exclude<MetricName, "features">): number | null {
  if (metric === "accuracy") return row.accuracy;
  return row[metric];
}

function curvePanel(artifact: Artifact, metric: Exclude<MetricName, "features">, classes: number[]): Panel {
  const series: Series[] = classes.map((c) => {
    const rows = artifact.rows.filter((r) => r.cls === c && r.split === "train");
    const pts = rows
      .map((r) => [r.epoch, curveValue(r, metric)] as const)
      .filter(([, v]) => v !== null) as [number, number][];
    return { name: `class ${c}`, x: pts.map((p) => p[0]), y: pts.map((p) => p[1]) };
  });
  return {
    title: artifact.mode,
    xLabel: "epoch",
    yLabel: Y_LABELS[metric],
    series,
  };
}

function featuresPanel(artifact: Artifact, classes: number[]): Panel {
  const dim = featureDim(artifact);
  if (dim !== 2) {
    throw new Error(`metric=features requires feature_dim = 2, artifact has ${dim}`);
  }
  const groups: ScatterGroup[] = [];
  for (const split of ["train", "test"] as const) {
    const rows = loadFeatures(artifact.dir, split);
    for (const c of classes) {
      const pts = rows.filter((r) => r.label === c);
      groups.push({
        name: `${split} ${c}`,
        x: pts.map((r) => r.coords[0]),
        y: pts.map((r) => r.coords[1]),
        marker: split === "train" ? "circle" : "cross",
      });
    }
  }
  return { title: `${artifact.mode} features`, xLabel: "f0", yLabel: "f1", scatter: groups };
}

export function buildFigure(spec: PlotSpec): Figure {
  if (spec.artifactDirs.length < 1 || spec.artifactDirs.length > 2) {
    throw new Error("spec requires one or two artifact directories");
  }
  if (!METRIC_NAMES.includes(spec.metric)) {
    throw new Error(`unknown metric ${JSON.stringify(spec.metric)}`);
  }
  const artifacts = spec.artifactDirs.map(loadArtifact);
  const panels = artifacts.map((a) => {
    const classes = classList(a, spec.classes);
    return spec.metric === "features"
      ? featuresPanel(a, classes)
      : curvePanel(a, spec.metric, classes);
  });
  const caption = artifacts
    .map((a) => `${a.mode} config ${a.configHash}`)
    .join("  |  ");
  return { panels, caption: `${spec.metric} | ${caption}` };
}

export function render(spec: PlotSpec): string {
  const svg = renderFigure(buildFigure(spec));
  writeFileSync(spec.output, svg);
  return spec.output;
}
