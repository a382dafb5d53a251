"""Fill the L2 columns of the golden label file with verdicts from an
independent validator stack (PyYAML + python-jsonschema, Draft 7) run
against the strict schema cache.

usage: python3 golden_labels.py <golden-dir> <schema-dir>
"""
import json
import pathlib
import sys

import jsonschema
import yaml

CODES = {
    "required": "required-field",
    "additionalProperties": "unknown-field",
    "type": "type-mismatch",
    "oneOf": "type-mismatch",
    "anyOf": "type-mismatch",
    "enum": "enum-value",
    "const": "enum-value",
}


def schema_file(api_version, kind):
    group, _, version = api_version.rpartition("/")
    label = group.split(".")[0]
    name = f"{kind}-{label}-{version}" if label else f"{kind}-{version}"
    return name.lower() + ".json"


def l2_codes(text, schema_dir):
    codes = set()
    for doc in yaml.safe_load_all(text):
        if doc is None:
            continue
        path = schema_dir / schema_file(doc["apiVersion"], doc["kind"])
        if not path.exists():
            codes.add("schema-not-found")
            continue
        schema = json.loads(path.read_text())
        validator = jsonschema.Draft7Validator(schema)
        for err in validator.iter_errors(doc):
            codes.add(CODES.get(err.validator, "invalid-value"))
    return sorted(codes)


def main():
    golden = pathlib.Path(sys.argv[1])
    schemas = pathlib.Path(sys.argv[2])
    labels_path = golden / "labels.json"
    labels = json.loads(labels_path.read_text())
    for name, label in labels.items():
        if not label["l1"]:
            label["l2"] = False
            label["l2_rules"] = []
            continue
        codes = l2_codes((golden / name).read_text(), schemas)
        label["l2"] = not codes
        label["l2_rules"] = codes
    labels_path.write_text(json.dumps(labels, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
