/**
 * Node bindings for the vvkit toolkit.
 *
 * Thin, delegation-only wrappers around the `vvkit` CLI: no algorithm is
 * re-implemented here. Documents cross the boundary in the CLI's JSON
 * projection, exposed as plain objects (`BoundDoc`). Domain failures
 * surface as {@link VvkitError} carrying the toolkit's typed error name;
 * malformed values at the boundary raise {@link ConversionError}.
 *
 * The CLI is resolved from the `VVKIT_CLI` environment variable (a
 * space-separated command line), falling back to `vvkit` on PATH and then
 * to `python3 -m vvkit.cli`.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export type BBoxTuple = [number, number, number, number];

export interface TextSegment {
  kind: "text";
  text: string;
}

export interface WordSegment {
  kind: "word";
  text: string;
  bbox: BBoxTuple;
}

export interface ObjectSegment {
  kind: "object";
  text: string;
  bbox: BBoxTuple | null;
}

export type Segment = TextSegment | WordSegment | ObjectSegment;

/** Mirror of one parsed model response in the CLI's JSON projection. */
export interface BoundDoc {
  mode: "ocr" | "grounding";
  segments: Segment[];
}

export interface GtWordRecord {
  text: string;
  bbox: BBoxTuple;
}

/** One ground-truth record, matching the eval JSONL schema. */
export interface GtRecord {
  id?: string;
  width?: number;
  height?: number;
  units?: "px" | "norm";
  words: GtWordRecord[];
}

/** A typed toolkit failure forwarded from the CLI's diagnostic stream. */
export class VvkitError extends Error {
  readonly code: string;

  constructor(code: string, message: string) {
    super(message);
    this.name = "VvkitError";
    this.code = code;
  }
}

/** A value that does not fit the document/report wire shape. */
export class ConversionError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ConversionError";
  }
}

let cachedCli: string[] | null = null;

function resolveCli(): string[] {
  if (cachedCli) return cachedCli;
  const fromEnv = process.env.VVKIT_CLI;
  if (fromEnv && fromEnv.trim()) {
    cachedCli = fromEnv.trim().split(/\s+/);
    return cachedCli;
  }
  for (const candidate of [["vvkit"], ["python3", "-m", "vvkit.cli"]]) {
    const probe = spawnSync(candidate[0], [...candidate.slice(1), "--version"], {
      encoding: "utf8",
    });
    if (!probe.error && probe.status === 0) {
      cachedCli = candidate;
      return cachedCli;
    }
  }
  throw new Error(
    "vvkit CLI not found; install the primary package or set VVKIT_CLI",
  );
}

function invoke(args: string[], input?: string): string {
  const [cmd, ...prefix] = resolveCli();
  const result = spawnSync(cmd, [...prefix, ...args], {
    input: input ?? "",
    encoding: "utf8",
    maxBuffer: 64 * 1024 * 1024,
  });
  if (result.error) throw result.error;
  if (result.status === 0) return result.stdout;
  const lines = (result.stderr ?? "").trim().split("\n");
  const last = lines[lines.length - 1] ?? "";
  const match = /^([A-Za-z]\w*): ([\s\S]*)$/.exec(last);
  if (result.status === 1 && match) {
    throw new VvkitError(match[1], match[2]);
  }
  throw new VvkitError(
    result.status === 2 ? "UsageError" : "UnknownError",
    last || `vvkit exited with status ${result.status}`,
  );
}

function isBBox(value: unknown): value is BBoxTuple {
  return (
    Array.isArray(value) &&
    value.length === 4 &&
    value.every((v) => typeof v === "number" && Number.isFinite(v))
  );
}

/**
 * Validate an arbitrary value as a BoundDoc. The conversion is the
 * identity on valid documents, so BoundDoc -> wire JSON -> BoundDoc is
 * lossless by construction.
 */
export function toBoundDoc(value: unknown): BoundDoc {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    throw new ConversionError("document must be an object");
  }
  const doc = value as Record<string, unknown>;
  if (doc.mode !== "ocr" && doc.mode !== "grounding") {
    throw new ConversionError(`unknown mode ${JSON.stringify(doc.mode)}`);
  }
  if (!Array.isArray(doc.segments)) {
    throw new ConversionError("segments must be an array");
  }
  const segments = doc.segments.map((raw, i): Segment => {
    if (typeof raw !== "object" || raw === null) {
      throw new ConversionError(`segment ${i} must be an object`);
    }
    const seg = raw as Record<string, unknown>;
    if (typeof seg.text !== "string") {
      throw new ConversionError(`segment ${i}: text must be a string`);
    }
    switch (seg.kind) {
      case "text":
        return { kind: "text", text: seg.text };
      case "word":
        if (!isBBox(seg.bbox)) {
          throw new ConversionError(`segment ${i}: word needs a 4-number bbox`);
        }
        return { kind: "word", text: seg.text, bbox: [...seg.bbox] as BBoxTuple };
      case "object":
        if (seg.bbox !== null && !isBBox(seg.bbox)) {
          throw new ConversionError(`segment ${i}: bbox must be null or 4 numbers`);
        }
        return {
          kind: "object",
          text: seg.text,
          bbox: seg.bbox === null ? null : ([...(seg.bbox as BBoxTuple)] as BBoxTuple),
        };
      default:
        throw new ConversionError(
          `segment ${i}: unknown kind ${JSON.stringify(seg.kind)}`,
        );
    }
  });
  return { mode: doc.mode, segments };
}

function parseDocOutput(stdout: string): BoundDoc {
  try {
    return toBoundDoc(JSON.parse(stdout));
  } catch (err) {
    if (err instanceof ConversionError) throw err;
    throw new ConversionError(`CLI emitted unparseable JSON: ${err}`);
  }
}

/** Parse an OCR response; identical contract to the toolkit operation. */
export function boundParseOcr(text: string): BoundDoc {
  return parseDocOutput(invoke(["parse-ocr"], text));
}

/** Parse a grounding response; identical contract to the toolkit operation. */
export function boundParseGrounding(text: string): BoundDoc {
  return parseDocOutput(invoke(["parse-grounding"], text));
}

/** Reorder an ocr document's words into human reading order. */
export function boundReadingOrder(doc: BoundDoc): BoundDoc {
  const valid = toBoundDoc(doc);
  return parseDocOutput(invoke(["order"], JSON.stringify(valid)));
}

/**
 * Score one predicted OCR response against one ground-truth record.
 * Returns the CLI's report mapping (threshold, per-image rows, aggregate).
 */
export function boundEvalImage(
  predText: string,
  gtRecord: GtRecord,
  threshold = 0.5,
): Record<string, unknown> {
  if (!Array.isArray(gtRecord.words)) {
    throw new ConversionError("gtRecord.words must be an array");
  }
  const id = gtRecord.id ?? "image";
  const dir = mkdtempSync(join(tmpdir(), "vvkit-bindings-"));
  try {
    const gtPath = join(dir, "gt.jsonl");
    const predPath = join(dir, "pred.jsonl");
    writeFileSync(gtPath, JSON.stringify({ ...gtRecord, id }) + "\n", "utf8");
    writeFileSync(
      predPath,
      JSON.stringify({ id, response: predText }) + "\n",
      "utf8",
    );
    const stdout = invoke([
      "eval-ocr",
      "--gt",
      gtPath,
      "--pred",
      predPath,
      "--threshold",
      String(threshold),
    ]);
    try {
      return JSON.parse(stdout) as Record<string, unknown>;
    } catch (err) {
      throw new ConversionError(`CLI emitted unparseable JSON: ${err}`);
    }
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
