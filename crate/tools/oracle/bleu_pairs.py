"""Reference BLEU for the frozen pairs in crates/core/tests/bleu.rs.

Texts are already in canonical form. They are pre-tokenized on whitespace
and YAML punctuation, then scored with sacrebleu (BLEU-4, add-one smoothing
for n > 1, brevity penalty, no further tokenization).
"""
import json
import re
import sys

from sacrebleu.metrics import BLEU

TOKEN = re.compile(r"[:\-{}\[\],]|[^\s:\-{}\[\],]+")

PAIRS = [
    (
        "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: app\n",
        "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: web\n",
    ),
    (
        "apiVersion: apps/v1\nkind: Deployment\nmetadata:\n  name: api\nspec:\n  replicas: 2\n",
        "apiVersion: apps/v1\nkind: Deployment\nmetadata:\n  labels:\n    app: api\n  name: api\nspec:\n  replicas: 3\n  selector:\n    matchLabels:\n      app: api\n",
    ),
    (
        "apiVersion: v1\nkind: Service\nmetadata:\n  name: web\nspec:\n  ports:\n    - port: 80\n      targetPort: 8080\n  selector:\n    app: web\n",
        "apiVersion: v1\nkind: Service\nmetadata:\n  name: web\nspec:\n  ports:\n    - port: 443\n      targetPort: 8443\n  selector:\n    app: web\n",
    ),
    (
        "apiVersion: v1\nkind: Secret\nmetadata:\n  name: creds\ntype: Opaque\n---\napiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: settings\n",
        "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: settings\n",
    ),
    (
        "apiVersion: networking.k8s.io/v1\nkind: NetworkPolicy\nmetadata:\n  name: deny\nspec:\n  podSelector: {}\n  policyTypes:\n    - Ingress\n",
        "apiVersion: networking.k8s.io/v1\nkind: NetworkPolicy\nmetadata:\n  name: allow-dns\nspec:\n  egress:\n    - ports:\n        - port: 53\n          protocol: UDP\n  podSelector: {}\n  policyTypes:\n    - Egress\n",
    ),
]


def main():
    scorer = BLEU(tokenize="none", smooth_method="add-k", smooth_value=1, effective_order=False)
    out = []
    for cand, ref in PAIRS:
        c = " ".join(TOKEN.findall(cand))
        r = " ".join(TOKEN.findall(ref))
        out.append(round(scorer.sentence_score(c, [r]).score, 6))
    json.dump(out, sys.stdout)
    print()


if __name__ == "__main__":
    main()
