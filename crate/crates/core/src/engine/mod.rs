//! Multi-chain MCMC runs, posterior summaries and model evidence.

mod evidence;
mod iat;

pub use evidence::{log_evidence, EvidenceConfig, EvidenceEstimate};
pub use iat::{estimate_iat, estimate_iat_bool};

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservationMatrix;
use crate::error::{param_err, Result};
use crate::hyper::{
    mh_update_rate_only, mh_update_weight_rate, sample_edge_pair, sample_rho, AcceptStats, MhConfig,
};
use crate::pgibbs::{pg_update_series, single_site_update};
use crate::prior::{change_prob, GraphParams, HiddenStateMatrix};
use crate::segment::{SegmentDensities, SegmentModel, SegmentSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Latent graph with edge updates.
    #[default]
    Netcp,
    /// Empty graph; only the background rates are learned.
    Yao,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    #[default]
    ParticleGibbs,
    SingleSite,
}

/// One segment spec shared by all series, or one per series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SegmentChoice {
    Shared(SegmentSpec),
    PerSeries(Vec<SegmentSpec>),
}

impl Default for SegmentChoice {
    fn default() -> Self {
        Self::Shared(SegmentSpec::default())
    }
}

impl SegmentChoice {
    pub fn specs(&self) -> Vec<SegmentSpec> {
        match self {
            Self::Shared(s) => vec![s.clone()],
            Self::PerSeries(v) => v.clone(),
        }
    }
}

/// Settings of a full MCMC run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub n_iters: usize,
    pub burn_in: usize,
    pub n_chains: usize,
    pub particles: usize,
    pub seed: u64,
    pub model: ModelKind,
    pub kernel: KernelKind,
    pub segment: SegmentChoice,
    pub mh: MhConfig,
    /// Entry budget of the per-chain segment density cache; 0 disables it.
    pub cache_budget: usize,
    /// Keep every `trace_thin`-th post-burn-in parameter draw.
    pub trace_thin: usize,
    /// Hold the graph parameters at their initial values.
    pub freeze_graph_params: bool,
    /// Starting graph parameters; prior means when absent.
    pub init_params: Option<GraphParams>,
    /// Estimate the IAT of every change indicator.
    pub indicator_iat: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_iters: 2000,
            burn_in: 200,
            n_chains: 1,
            particles: 200,
            seed: 0,
            model: ModelKind::Netcp,
            kernel: KernelKind::ParticleGibbs,
            segment: SegmentChoice::default(),
            mh: MhConfig::default(),
            cache_budget: 0,
            trace_thin: 1,
            freeze_graph_params: false,
            init_params: None,
            indicator_iat: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iters {
            return param_err(format!("burn_in {} must be below n_iters {}", self.burn_in, self.n_iters));
        }
        if self.particles < 2 {
            return param_err("at least 2 particles are required");
        }
        if self.n_chains < 1 || self.trace_thin < 1 {
            return param_err("n_chains and trace_thin must be at least 1");
        }
        self.mh.validate()?;
        if let Some(g) = &self.init_params {
            g.validate()?;
            if self.model == ModelKind::Yao && g.edge_count() > 0 {
                return param_err("the yao model requires an empty graph");
            }
        }
        Ok(())
    }
}

/// One retained draw of the graph parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDraw {
    pub rho: f64,
    #[serde(rename = "W0")]
    pub w0: Vec<f64>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub q0: Vec<f64>,
    pub q: Vec<Vec<f64>>,
}

impl From<&GraphParams> for ParamDraw {
    fn from(g: &GraphParams) -> Self {
        Self {
            rho: g.rho,
            w0: g.w0.clone(),
            w: g.w.clone(),
            q0: g.q0.clone(),
            q: g.q.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_chains: usize,
    /// Post-burn-in sweeps pooled over chains.
    pub n_draws: usize,
    /// Metropolis acceptance rate of the weight/rate updates.
    pub acceptance_rate: Option<f64>,
    /// Per-series, per-time IAT of the change indicators (first chain);
    /// `None` entries are constant traces.
    pub indicator_iat: Option<Vec<Vec<Option<f64>>>>,
}

/// Pooled posterior output of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    /// `cp_prob[j][t-1] = Pr(U_{j,t} = 1 | y)`.
    pub cp_prob: Vec<Vec<f64>>,
    pub edge_prob: Vec<Vec<f64>>,
    pub param_traces: Vec<ParamDraw>,
    pub diagnostics: Diagnostics,
    pub log_evidence: Option<f64>,
}

/// State of a single Markov chain.
pub struct Chain<'a> {
    cfg: RunConfig,
    dens: SegmentDensities<'a>,
    x: HiddenStateMatrix,
    g: GraphParams,
    rng: ChaCha8Rng,
    accept: AcceptStats,
}

impl<'a> Chain<'a> {
    /// Chain over the first `len` time points of `model`, starting from an
    /// empty change-point configuration.
    pub fn new(model: &'a SegmentModel, cfg: &RunConfig, index: u64, len: usize) -> Result<Self> {
        cfg.validate()?;
        if len == 0 || len > model.len() {
            return param_err(format!("chain length {len} outside 1..={}", model.len()));
        }
        let d = model.dim();
        let g = match &cfg.init_params {
            Some(g) if g.dim() != d => return param_err(format!("initial parameters are {}-dimensional", g.dim())),
            Some(g) => g.clone(),
            None => GraphParams::prior_means(d),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index);
        Ok(Self {
            cfg: cfg.clone(),
            dens: SegmentDensities::new(model, cfg.cache_budget),
            x: HiddenStateMatrix::empty(d, len),
            g,
            rng,
            accept: AcceptStats::default(),
        })
    }

    pub fn states(&self) -> &HiddenStateMatrix {
        &self.x
    }

    pub fn params(&self) -> &GraphParams {
        &self.g
    }

    pub fn acceptance(&self) -> AcceptStats {
        self.accept
    }

    pub fn densities(&mut self) -> &mut SegmentDensities<'a> {
        &mut self.dens
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// One full iteration: every hidden path, then the graph parameters.
    pub fn sweep(&mut self) -> Result<()> {
        self.update_states()?;
        if !self.cfg.freeze_graph_params {
            self.update_params();
        }
        Ok(())
    }

    pub fn update_states(&mut self) -> Result<()> {
        for j in 0..self.x.dim() {
            match self.cfg.kernel {
                KernelKind::ParticleGibbs => {
                    let path = pg_update_series(j, &self.x, &self.g, self.cfg.particles, &mut self.dens, &mut self.rng)?;
                    self.x.set_row(j, path);
                }
                KernelKind::SingleSite => single_site_update(j, &mut self.x, &self.g, &mut self.dens, &mut self.rng)?,
            }
        }
        Ok(())
    }

    pub fn update_params(&mut self) {
        let d = self.x.dim();
        let (x, g, rng, mh) = (&self.x, &mut self.g, &mut self.rng, &self.cfg.mh);
        match self.cfg.model {
            ModelKind::Yao => {
                for j in 0..d {
                    self.accept.merge(mh_update_rate_only(j, x, g, mh, rng));
                }
            }
            ModelKind::Netcp => {
                for i in 0..d {
                    for j in i + 1..d {
                        sample_edge_pair(i, j, x, g, rng);
                    }
                }
                g.rho = sample_rho(&g.adjacency, rng);
                for j in 0..d {
                    self.accept.merge(mh_update_weight_rate(None, j, x, g, mh, rng));
                    for i in (0..d).filter(|&i| i != j) {
                        self.accept.merge(mh_update_weight_rate(Some(i), j, x, g, mh, rng));
                    }
                }
            }
        }
    }

    /// Appends time `len + 1` by one forward step of the prior.
    pub fn extend(&mut self) {
        let t = self.x.len() + 1;
        let prev = self.x.column(t - 1);
        let col: Vec<usize> = (0..prev.len())
            .map(|j| {
                let p = change_prob(j, t, &prev, &self.g);
                if rand::Rng::random::<f64>(&mut self.rng) < p {
                    t - 1
                } else {
                    prev[j]
                }
            })
            .collect();
        self.x.push_column(&col);
    }
}

struct ChainOutput {
    cp_counts: Vec<Vec<u64>>,
    edge_counts: Vec<Vec<u64>>,
    traces: Vec<ParamDraw>,
    indicators: Option<Vec<Vec<Vec<bool>>>>,
    accept: AcceptStats,
    draws: usize,
}

/// Work limit for storing every indicator trace (entries).
const INDICATOR_TRACE_LIMIT: usize = 50_000_000;

fn run_chain(model: &SegmentModel, cfg: &RunConfig, index: usize) -> Result<ChainOutput> {
    let mut chain = Chain::new(model, cfg, index as u64, model.len())?;
    let (d, len) = (model.dim(), model.len());
    let keep = cfg.n_iters - cfg.burn_in;
    let store_ind = cfg.indicator_iat && index == 0 && d * len * keep <= INDICATOR_TRACE_LIMIT;
    if cfg.indicator_iat && !store_ind && index == 0 {
        warn!("indicator traces skipped: {} entries exceed the storage limit", d * len * keep);
    }
    let mut out = ChainOutput {
        cp_counts: vec![vec![0; len]; d],
        edge_counts: vec![vec![0; d]; d],
        traces: Vec::new(),
        indicators: store_ind.then(|| vec![vec![Vec::with_capacity(keep); len]; d]),
        accept: AcceptStats::default(),
        draws: 0,
    };
    for it in 0..cfg.n_iters {
        chain.sweep()?;
        if it < cfg.burn_in {
            continue;
        }
        let x = chain.states();
        for j in 0..d {
            for t in 2..=len {
                let u = x.indicator(j, t);
                out.cp_counts[j][t - 1] += u as u64;
                if let Some(ind) = &mut out.indicators {
                    ind[j][t - 1].push(u);
                }
            }
        }
        let g = chain.params();
        for i in 0..d {
            for j in 0..d {
                out.edge_counts[i][j] += g.adjacency[i][j] as u64;
            }
        }
        if (it - cfg.burn_in) % cfg.trace_thin == 0 {
            out.traces.push(ParamDraw::from(g));
        }
        out.draws += 1;
    }
    out.accept = chain.acceptance();
    Ok(out)
}

/// Runs `cfg.n_chains` chains (in parallel) and pools their draws.
pub fn run_mcmc(y: &ObservationMatrix, cfg: &RunConfig) -> Result<PosteriorSummary> {
    cfg.validate()?;
    let model = SegmentModel::new(y, &cfg.segment.specs())?;
    let outputs: Vec<ChainOutput> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| run_chain(&model, cfg, c))
        .collect::<Result<_>>()?;

    let (d, len) = (y.dim(), y.len());
    let draws: usize = outputs.iter().map(|o| o.draws).sum();
    let mut cp_prob = vec![vec![0.0; len]; d];
    let mut edge_prob = vec![vec![0.0; d]; d];
    let mut accept = AcceptStats::default();
    let mut param_traces = Vec::new();
    for o in &outputs {
        for j in 0..d {
            for t in 0..len {
                cp_prob[j][t] += o.cp_counts[j][t] as f64 / draws as f64;
            }
            for i in 0..d {
                edge_prob[j][i] += o.edge_counts[j][i] as f64 / draws as f64;
            }
        }
        accept.merge(o.accept);
        param_traces.extend(o.traces.iter().cloned());
    }
    let acceptance_rate = accept.rate();
    if cfg.model == ModelKind::Netcp && !cfg.freeze_graph_params {
        if let Some(r) = acceptance_rate {
            if !(0.05..=0.8).contains(&r) {
                warn!("weight/rate Metropolis acceptance rate {r:.3} outside (0.05, 0.8)");
            }
        }
    }
    let indicator_iat = outputs[0].indicators.as_ref().map(|ind| {
        ind.iter()
            .map(|row| row.iter().map(|tr| estimate_iat_bool(tr)).collect())
            .collect()
    });
    Ok(PosteriorSummary {
        cp_prob,
        edge_prob,
        param_traces,
        diagnostics: Diagnostics {
            n_chains: cfg.n_chains,
            n_draws: draws,
            acceptance_rate,
            indicator_iat,
        },
        log_evidence: None,
    })
}
