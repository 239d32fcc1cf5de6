import { execFileSync } from "node:child_process";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import { Answers, Schema } from "../src/validation.js";

const here = dirname(fileURLToPath(import.meta.url));

/** Dump the question tree from the installed Python package. */
export function loadSchema(): Schema {
  return JSON.parse(
    execFileSync(
      "python3",
      ["-c", "import json; from conflictkit.schema import SCHEMA; print(json.dumps(SCHEMA))"],
      { encoding: "utf-8" },
    ),
  );
}

export interface FixtureRecord {
  name: string;
  expected: "accepted" | "rejected";
  expected_codes: string[];
  answers: Answers;
}

/** The accept/reject fixture shared with the server test suite. */
export function loadFixture(): FixtureRecord[] {
  const raw = readFileSync(
    join(here, "..", "..", "tests", "fixtures", "conformance_records.json"),
    "utf-8",
  );
  return JSON.parse(raw).records;
}
