use std::time::Instant;

use serde::{Deserialize, Serialize};

/// Token count and wall time for one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub tokens: u64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    pub total_tokens: u64,
    pub total_ms: f64,
    /// Total time over total tokens.
    pub mean_ms_per_token: f64,
    /// Nearest-rank 95th percentile of per-generation ms/token.
    pub p95_ms_per_token: f64,
}

impl TokenStats {
    /// `None` when no timing carries at least one token.
    pub fn from_timings(timings: &[Timing]) -> Option<Self> {
        let usable: Vec<&Timing> = timings.iter().filter(|t| t.tokens > 0).collect();
        if usable.is_empty() {
            return None;
        }
        let total_tokens: u64 = usable.iter().map(|t| t.tokens).sum();
        let total_ms: f64 = usable.iter().map(|t| t.elapsed_ms).sum();
        let mut rates: Vec<f64> = usable.iter().map(|t| t.elapsed_ms / t.tokens as f64).collect();
        rates.sort_by(f64::total_cmp);
        let rank = (0.95 * rates.len() as f64).ceil() as usize;
        Some(Self {
            total_tokens,
            total_ms,
            mean_ms_per_token: total_ms / total_tokens as f64,
            p95_ms_per_token: rates[rank.clamp(1, rates.len()) - 1],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResourceStats {
    pub wall_ms: f64,
    /// Peak resident set size of the process in KiB, where the platform reports it.
    pub peak_rss_kib: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<TokenStats>,
}

/// Process high-water RSS from /proc (Linux only).
pub fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse().ok())
}

/// Runs `f` and reports its wall time and the process memory peak.
pub fn resource_probe<T>(f: impl FnOnce() -> T) -> (T, ResourceStats) {
    let start = Instant::now();
    let out = f();
    let stats = ResourceStats {
        wall_ms: start.elapsed().as_secs_f64() * 1000.0,
        peak_rss_kib: peak_rss_kib(),
        tokens: None,
    };
    (out, stats)
}
