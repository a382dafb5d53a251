//! Frozen BLEU reference pairs.

/// Canonical-form pairs and their scores from an independent reference
/// scorer (tools/oracle/bleu_pairs.py).
pub const PAIRS: [(&str, &str, f64); 5] = [
    (
        "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: app\n",
        "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: web\n",
        90.172924,
    ),
    (
        "apiVersion: apps/v1\nkind: Deployment\nmetadata:\n  name: api\nspec:\n  replicas: 2\n",
        "apiVersion: apps/v1\nkind: Deployment\nmetadata:\n  labels:\n    app: api\n  name: api\nspec:\n  replicas: 3\n  selector:\n    matchLabels:\n      app: api\n",
        39.085391,
    ),
    (
        "apiVersion: v1\nkind: Service\nmetadata:\n  name: web\nspec:\n  ports:\n    - port: 80\n      targetPort: 8080\n  selector:\n    app: web\n",
        "apiVersion: v1\nkind: Service\nmetadata:\n  name: web\nspec:\n  ports:\n    - port: 443\n      targetPort: 8443\n  selector:\n    app: web\n",
        81.298469,
    ),
    (
        "apiVersion: v1\nkind: Secret\nmetadata:\n  name: creds\ntype: Opaque\n---\napiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: settings\n",
        "apiVersion: v1\nkind: ConfigMap\nmetadata:\n  name: settings\n",
        37.505389,
    ),
    (
        "apiVersion: networking.k8s.io/v1\nkind: NetworkPolicy\nmetadata:\n  name: deny\nspec:\n  podSelector: {}\n  policyTypes:\n    - Ingress\n",
        "apiVersion: networking.k8s.io/v1\nkind: NetworkPolicy\nmetadata:\n  name: allow-dns\nspec:\n  egress:\n    - ports:\n        - port: 53\n          protocol: UDP\n  podSelector: {}\n  policyTypes:\n    - Egress\n",
        38.729577,
    ),
];
