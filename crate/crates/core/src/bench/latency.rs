use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BenchError, Property, Testbed, FEATURE_RESOURCES};
use crate::chain::Signer;
use crate::gateway::{
    Arch, DeploymentMode, EchoService, Gateway, GatewayConfig, Service, ServiceRequest, H_ACCESS_US, H_AUTH_US,
    H_SERVICE_US, MICRO_HOPS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcMode {
    Off,
    Blendcac,
}

impl FromStr for AcMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(AcMode::Off),
            "blendcac" => Ok(AcMode::Blendcac),
            other => Err(format!("unknown access-control mode {other:?} (expected off or blendcac)")),
        }
    }
}

impl std::fmt::Display for AcMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AcMode::Off => "off",
            AcMode::Blendcac => "blendcac",
        })
    }
}

/// One latency run. `n_requests` counts the warmup requests too; the
/// summary covers the last `n_requests - warmup_requests`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub arch: Arch,
    pub ac: AcMode,
    pub n_requests: usize,
    pub warmup_requests: usize,
    /// Per internal hop, micro mode only.
    pub link_delay_ms: f64,
    pub seed: u64,
    /// Client-to-gateway link applied in both modes.
    pub client_link_delay_ms: f64,
    pub block_interval_ms: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            arch: Arch::Mono,
            ac: AcMode::Off,
            n_requests: 1050,
            warmup_requests: 50,
            link_delay_ms: 0.0,
            seed: 1,
            client_link_delay_ms: 5.0,
            block_interval_ms: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.n_requests <= self.warmup_requests {
            return Err(BenchError::Config(format!(
                "n_requests ({}) must exceed warmup_requests ({})",
                self.n_requests, self.warmup_requests
            )));
        }
        if !(self.link_delay_ms >= 0.0 && self.link_delay_ms.is_finite()) {
            return Err(BenchError::Config("link_delay_ms must be non-negative".into()));
        }
        if !(self.client_link_delay_ms >= 0.0 && self.client_link_delay_ms.is_finite()) {
            return Err(BenchError::Config("client_link_delay_ms must be non-negative".into()));
        }
        if self.block_interval_ms == 0 {
            return Err(BenchError::Config("block_interval_ms must be positive".into()));
        }
        Ok(())
    }

    fn mode(&self) -> DeploymentMode {
        match self.arch {
            Arch::Mono => DeploymentMode::mono(),
            Arch::Micro => DeploymentMode::micro(self.link_delay_ms),
        }
    }
}

/// Client-observed latency of one request. `transport_ms` is whatever the
/// server-side stages do not account for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub request_id: String,
    pub total_ms: f64,
    pub transport_ms: f64,
    pub auth_ms: f64,
    pub access_ms: f64,
    pub service_ms: f64,
}

impl LatencySample {
    pub fn stage_sum(&self) -> f64 {
        self.transport_ms + self.auth_ms + self.access_ms + self.service_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub arch: Arch,
    pub ac: AcMode,
    pub link_delay_ms: f64,
    pub samples: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub transport_mean_ms: f64,
    pub auth_mean_ms: f64,
    pub access_mean_ms: f64,
    pub service_mean_ms: f64,
}

#[derive(Debug, Clone)]
pub struct LatencyRun {
    pub config: ExperimentConfig,
    pub samples: Vec<LatencySample>,
    pub summary: LatencySummary,
    pub properties: Vec<Property>,
}

/// Nearest-rank quantile of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 { 0.0 } else { sum / n as f64 }
}

pub fn summarize(config: &ExperimentConfig, samples: &[LatencySample]) -> LatencySummary {
    let mut totals: Vec<f64> = samples.iter().map(|s| s.total_ms).collect();
    totals.sort_by(f64::total_cmp);
    LatencySummary {
        arch: config.arch,
        ac: config.ac,
        link_delay_ms: config.link_delay_ms,
        samples: samples.len(),
        mean_ms: mean(totals.iter().copied()),
        p50_ms: quantile(&totals, 0.50),
        p95_ms: quantile(&totals, 0.95),
        transport_mean_ms: mean(samples.iter().map(|s| s.transport_ms)),
        auth_mean_ms: mean(samples.iter().map(|s| s.auth_ms)),
        access_mean_ms: mean(samples.iter().map(|s| s.access_ms)),
        service_mean_ms: mean(samples.iter().map(|s| s.service_ms)),
    }
}

/// Per-run checks: stage accounting, zero auth/access without access
/// control, and the hop-delay floor in micro mode.
pub fn latency_properties(config: &ExperimentConfig, samples: &[LatencySample], summary: &LatencySummary) -> Vec<Property> {
    let worst_slack = samples.iter().map(|s| (s.stage_sum() - s.total_ms).abs()).fold(0.0, f64::max);
    let mut props = vec![Property::new("stage_sum_within_1ms", worst_slack <= 1.0, format!("worst slack {worst_slack:.4} ms"))];
    if config.ac == AcMode::Off {
        let zero = samples.iter().all(|s| s.auth_ms == 0.0 && s.access_ms == 0.0);
        props.push(Property::new("ac_off_zero_auth_access", zero, String::new()));
    }
    if config.arch == Arch::Micro {
        let floor = MICRO_HOPS as f64 * config.link_delay_ms;
        props.push(Property::new(
            "micro_mean_at_least_hops_times_delay",
            summary.mean_ms >= floor,
            format!("mean {:.3} ms vs floor {floor:.3} ms", summary.mean_ms),
        ));
    }
    props
}

/// Brings up a ledger and a gateway, registers one client holding a read
/// token on the feature resources, and issues `n_requests` sequential
/// guarded service calls. Setup transactions that never confirm surface as
/// [`BenchError::ChainStalled`].
pub fn run_latency(config: &ExperimentConfig) -> Result<LatencyRun, BenchError> {
    config.validate()?;
    let bed = Testbed::new(&format!("latency/{}", config.seed), 1, config.block_interval_ms)?;
    let client_key = &bed.clients[0];
    let vid = format!("client-{}", config.seed);
    bed.register(client_key, &vid)?;
    let token = bed.issue(&client_key.address(), FEATURE_RESOURCES, "read", u32::MAX as u64, 0)?;

    let gw_config = GatewayConfig {
        mode: config.mode(),
        enforce: config.ac == AcMode::Blendcac,
        client_link_delay_ms: config.client_link_delay_ms,
        registry: bed.registry,
        capability: bed.capability,
        ..GatewayConfig::default()
    };
    let services = vec![("features".to_string(), Arc::new(EchoService) as Arc<dyn Service>)];
    let gw = Gateway::start(bed.chain.clone(), services, gw_config)?;
    let client = gw.client();
    let health = client.health()?;
    if health.status != 200 {
        return Err(BenchError::ServiceDown(format!("health returned {}", health.status)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut samples = Vec::with_capacity(config.n_requests - config.warmup_requests);
    for i in 0..config.n_requests {
        let payload: [u8; 32] = rng.random();
        let req = ServiceRequest {
            requester_vid: vid.clone(),
            token_id: Some(token),
            resource: "/features/track".into(),
            action: "read".into(),
            body: hex::encode(payload),
            request_id: format!("{}-{i:06}", config.seed),
        };
        let start = Instant::now();
        let reply = client.service("features", &req)?;
        let total_ms = start.elapsed().as_secs_f64() * 1000.0;
        if reply.status != 200 {
            return Err(BenchError::ServiceDown(format!(
                "request {} returned {}: {}",
                req.request_id,
                reply.status,
                String::from_utf8_lossy(&reply.body)
            )));
        }
        if i < config.warmup_requests {
            continue;
        }
        let auth_ms = reply.header_u64(H_AUTH_US) as f64 / 1000.0;
        let access_ms = reply.header_u64(H_ACCESS_US) as f64 / 1000.0;
        let service_ms = reply.header_u64(H_SERVICE_US) as f64 / 1000.0;
        samples.push(LatencySample {
            request_id: req.request_id,
            total_ms,
            transport_ms: total_ms - auth_ms - access_ms - service_ms,
            auth_ms,
            access_ms,
            service_ms,
        });
    }
    bed.chain.stop_producer();
    let summary = summarize(config, &samples);
    let properties = latency_properties(config, &samples, &summary);
    Ok(LatencyRun { config: config.clone(), samples, summary, properties })
}
