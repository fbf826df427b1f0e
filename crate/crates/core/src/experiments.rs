//! Simulation study: synthetic scenarios, link recovery and Bayes factors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservationMatrix;
use crate::engine::{log_evidence, run_mcmc, EvidenceConfig, ModelKind, RunConfig, SegmentChoice};
use crate::error::{NetcpError, Result};
use crate::prior::{simulate_prior_with, GraphParams, HiddenStateMatrix};
use crate::segment::SegmentSpec;

/// Background change rate shared by every scenario.
pub const BASE_RATE: f64 = 1.0 / 40.0;
pub const GAUSS_SIGMA2: f64 = 0.5;
pub const GAUSS_GAMMA2: f64 = 3.0;
/// `(φ, σ²)` states visited in turn by successive AR(1) segments.
pub const AR1_STATES: [(f64, f64); 4] = [(-0.8, 0.09), (0.8, 1.0), (-0.8, 4.0), (0.8, 9.0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioId {
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl FromStr for ScenarioId {
    type Err = NetcpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Ok(Self::S1),
            "S2" => Ok(Self::S2),
            "S3" => Ok(Self::S3),
            "S4" => Ok(Self::S4),
            "S5" => Ok(Self::S5),
            _ => Err(NetcpError::Parameter(format!("unknown scenario {s:?}"))),
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodKind {
    GaussMean,
    Ar1,
}

impl FromStr for LikelihoodKind {
    type Err = NetcpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss_mean" | "gauss" => Ok(Self::GaussMean),
            "ar1" | "ar" => Ok(Self::Ar1),
            _ => Err(NetcpError::Parameter(format!("unknown likelihood {s:?}"))),
        }
    }
}

impl LikelihoodKind {
    /// Segment model used when fitting data of this kind.
    pub fn fit_spec(self) -> SegmentSpec {
        match self {
            Self::GaussMean => SegmentSpec::gauss_mean(GAUSS_SIGMA2, GAUSS_GAMMA2),
            Self::Ar1 => SegmentSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: ScenarioId,
    pub d: usize,
    pub len: usize,
    pub likelihood: LikelihoodKind,
    pub replicates: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(scenario: ScenarioId, len: usize, likelihood: LikelihoodKind, replicates: usize, seed: u64) -> Self {
        Self {
            scenario,
            d: 4,
            len,
            likelihood,
            replicates,
            seed,
        }
    }

    /// Generating graph of S1/S2; `None` for the Bernoulli scenarios.
    pub fn graph_params(&self) -> Option<GraphParams> {
        let chain = |g: GraphParams, from: usize| g.with_edge(from, from + 1, 5.0, 0.6);
        let base = GraphParams::independent(self.d, BASE_RATE);
        match self.scenario {
            ScenarioId::S1 => Some((0..self.d - 1).fold(base, chain)),
            ScenarioId::S2 => Some((0..self.d - 1).filter(|&i| i != 1).fold(base, chain)),
            _ => None,
        }
    }

    pub fn true_adjacency(&self) -> Vec<Vec<bool>> {
        self.graph_params()
            .map(|g| g.adjacency)
            .unwrap_or_else(|| vec![vec![false; self.d]; self.d])
    }
}

/// One synthetic data set with its ground truth.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub y: ObservationMatrix,
    pub true_adjacency: Vec<Vec<bool>>,
    pub states: HiddenStateMatrix,
}

impl Scenario {
    /// Change-point times per series.
    pub fn change_points(&self) -> Vec<Vec<usize>> {
        (0..self.states.dim()).map(|j| self.states.change_points(j)).collect()
    }
}

/// Shared Bernoulli change times for each group of series.
fn grouped_bernoulli<R: Rng>(groups: &[Vec<usize>], d: usize, len: usize, rng: &mut R) -> HiddenStateMatrix {
    let mut changes = vec![Vec::new(); d];
    for group in groups {
        for c in 1..len {
            if rng.random::<f64>() < BASE_RATE {
                for &j in group {
                    changes[j].push(c);
                }
            }
        }
    }
    HiddenStateMatrix::from_change_points(d, len, &changes).expect("times in range")
}

pub fn generate_scenario(spec: &ScenarioSpec, replicate: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(replicate as u64);
    let (d, len) = (spec.d, spec.len);
    let states = match spec.scenario {
        ScenarioId::S1 | ScenarioId::S2 => simulate_prior_with(&spec.graph_params().expect("graph"), len, &mut rng),
        ScenarioId::S3 => grouped_bernoulli(&[(0..d).collect()], d, len, &mut rng),
        ScenarioId::S4 => grouped_bernoulli(&[(0..d / 2).collect(), (d / 2..d).collect()], d, len, &mut rng),
        ScenarioId::S5 => grouped_bernoulli(&(0..d).map(|j| vec![j]).collect::<Vec<_>>(), d, len, &mut rng),
    };
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rows = Vec::with_capacity(d);
    for j in 0..d {
        let mut row = Vec::with_capacity(len);
        let mut segment = 0usize;
        let mut theta = 0.0;
        let mut prev = 0.0;
        for t in 1..=len {
            let starts = t == 1 || states.indicator(j, t);
            if starts && t > 1 {
                segment += 1;
            }
            let v = match spec.likelihood {
                LikelihoodKind::GaussMean => {
                    if starts {
                        theta = GAUSS_GAMMA2.sqrt() * std_normal.sample(&mut rng);
                    }
                    theta + GAUSS_SIGMA2.sqrt() * std_normal.sample(&mut rng)
                }
                LikelihoodKind::Ar1 => {
                    let (phi, var) = AR1_STATES[segment % AR1_STATES.len()];
                    phi * prev + var.sqrt() * std_normal.sample(&mut rng)
                }
            };
            prev = v;
            row.push(v);
        }
        rows.push(row);
    }
    let lags = usize::from(spec.likelihood == LikelihoodKind::Ar1);
    Scenario {
        y: ObservationMatrix::new(rows, lags).expect("finite synthetic data"),
        true_adjacency: spec.true_adjacency(),
        states,
    }
}

/// Rank AUC of off-diagonal edge scores; ties count one half. `None` when the
/// truth has no edge or no non-edge.
pub fn link_auc(edge_prob: &[Vec<f64>], true_adjacency: &[Vec<bool>]) -> Option<f64> {
    let d = edge_prob.len();
    let mut scored: Vec<(f64, bool)> = Vec::new();
    for i in 0..d {
        for j in (0..d).filter(|&j| j != i) {
            scored.push((edge_prob[i][j], true_adjacency[i][j]));
        }
    }
    let pos = scored.iter().filter(|s| s.1).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    // midranks over tied scores
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < scored.len() {
        let mut e = k;
        while e + 1 < scored.len() && scored[e + 1].0 == scored[k].0 {
            e += 1;
        }
        let mid = (k + e) as f64 / 2.0 + 1.0;
        rank_sum += mid * scored[k..=e].iter().filter(|s| s.1).count() as f64;
        k = e + 1;
    }
    Some((rank_sum - (pos * (pos + 1)) as f64 / 2.0) / (pos * neg) as f64)
}

/// Mean with empirical 5% and 95% quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub q05: f64,
    pub q95: f64,
    pub n: usize,
}

impl Interval {
    pub fn from_samples(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q05: q(0.05),
            q95: q(0.95),
            n: v.len(),
        })
    }
}

/// Sampler budget of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyBudget {
    pub n_iters: usize,
    pub burn_in: usize,
    pub particles: usize,
    /// Per-prefix schedule for Bayes factors; `None` skips them.
    pub evidence: Option<EvidenceConfig>,
}

impl Default for StudyBudget {
    fn default() -> Self {
        Self {
            n_iters: 2000,
            burn_in: 200,
            particles: 150,
            evidence: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub auc: Option<f64>,
    /// Log evidence per model name.
    pub log_evidence: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub spec: ScenarioSpec,
    /// `None` when link recovery is undefined (no true edges).
    pub auc: Option<Interval>,
    /// Log Bayes factor of each model against netcp.
    pub log_bf_vs_netcp: BTreeMap<String, Interval>,
    pub replicates: Vec<ReplicateRecord>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub budget: StudyBudget,
    pub scenarios: Vec<ScenarioReport>,
}

fn model_name(m: ModelKind) -> &'static str {
    match m {
        ModelKind::Netcp => "netcp",
        ModelKind::Yao => "yao",
    }
}

fn run_replicate(spec: &ScenarioSpec, rep: usize, models: &[ModelKind], budget: &StudyBudget) -> Result<ReplicateRecord> {
    let data = generate_scenario(spec, rep);
    let base = RunConfig {
        n_iters: budget.n_iters,
        burn_in: budget.burn_in,
        particles: budget.particles,
        seed: spec.seed ^ (0x9e37_79b9_7f4a_7c15_u64.wrapping_mul(rep as u64 + 1)),
        segment: SegmentChoice::Shared(spec.likelihood.fit_spec()),
        ..Default::default()
    };
    let mut record = ReplicateRecord {
        replicate: rep,
        auc: None,
        log_evidence: BTreeMap::new(),
    };
    if models.contains(&ModelKind::Netcp) {
        let summary = run_mcmc(&data.y, &base)?;
        record.auc = link_auc(&summary.edge_prob, &data.true_adjacency);
    }
    if let Some(ev) = &budget.evidence {
        for &m in models {
            let cfg = RunConfig { model: m, ..base.clone() };
            let e = log_evidence(&data.y, &cfg, ev)?;
            record.log_evidence.insert(model_name(m).to_owned(), e.log_evidence);
        }
    }
    info!("{} replicate {rep}: auc {:?}, evidence {:?}", spec.scenario, record.auc, record.log_evidence);
    Ok(record)
}

/// Fits every model to every replicate of every scenario and aggregates.
pub fn run_study(specs: &[ScenarioSpec], models: &[ModelKind], budget: &StudyBudget) -> Result<EvalReport> {
    if models.is_empty() {
        return Err(NetcpError::Parameter("no models to fit".into()));
    }
    let mut scenarios = Vec::with_capacity(specs.len());
    for spec in specs {
        let results: Vec<Result<ReplicateRecord>> = (0..spec.replicates)
            .into_par_iter()
            .map(|r| run_replicate(spec, r, models, budget))
            .collect();
        let mut replicates = Vec::new();
        let mut failures = 0;
        for (r, res) in results.into_iter().enumerate() {
            match res {
                Ok(rec) => replicates.push(rec),
                Err(e) => {
                    warn!("{} replicate {r} failed: {e}", spec.scenario);
                    failures += 1;
                }
            }
        }
        let aucs: Vec<f64> = replicates.iter().filter_map(|r| r.auc).collect();
        let mut log_bf_vs_netcp = BTreeMap::new();
        if models.contains(&ModelKind::Netcp) {
            for &m in models {
                let name = model_name(m);
                let bfs: Vec<f64> = replicates
                    .iter()
                    .filter_map(|r| Some(r.log_evidence.get(name)? - r.log_evidence.get("netcp")?))
                    .collect();
                if let Some(iv) = Interval::from_samples(&bfs) {
                    log_bf_vs_netcp.insert(name.to_owned(), iv);
                }
            }
        }
        scenarios.push(ScenarioReport {
            spec: spec.clone(),
            auc: Interval::from_samples(&aucs),
            log_bf_vs_netcp,
            replicates,
            failures,
        });
    }
    Ok(EvalReport {
        budget: budget.clone(),
        scenarios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_auc(scores: &[(f64, bool)]) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0.0;
        for a in scores.iter().filter(|s| s.1) {
            for b in scores.iter().filter(|s| !s.1) {
                total += if a.0 > b.0 {
                    1.0
                } else if a.0 == b.0 {
                    0.5
                } else {
                    0.0
                };
                pairs += 1.0;
            }
        }
        total / pairs
    }

    #[test]
    fn auc_fixtures() {
        let truth = vec![vec![false, true], vec![false, false]];
        assert_eq!(link_auc(&[vec![0.0, 0.9], vec![0.1, 0.0]], &truth), Some(1.0));
        assert_eq!(link_auc(&[vec![0.0, 0.3], vec![0.3, 0.0]], &truth), Some(0.5));
        let truth3 = vec![vec![false, true, false], vec![false, false, true], vec![false, false, false]];
        let mut p = vec![vec![0.0; 3]; 3];
        p[0][1] = 0.8;
        p[1][2] = 0.4;
        for (i, j) in [(0, 2), (1, 0), (2, 0), (2, 1)] {
            p[i][j] = 0.6;
        }
        assert_eq!(link_auc(&p, &truth3), Some(0.5));
        assert_eq!(link_auc(&p, &[vec![false; 3], vec![false; 3], vec![false; 3]]), None);
    }

    #[test]
    fn shared_scenarios_share_change_points() {
        let spec = ScenarioSpec::new(ScenarioId::S3, 400, LikelihoodKind::GaussMean, 1, 5);
        let s = generate_scenario(&spec, 0);
        let cps = s.change_points();
        assert!(cps.iter().all(|c| c == &cps[0]));
        assert!(!cps[0].is_empty());
        let spec = ScenarioSpec::new(ScenarioId::S4, 400, LikelihoodKind::Ar1, 1, 5);
        let cps = generate_scenario(&spec, 0).change_points();
        assert_eq!(cps[0], cps[1]);
        assert_eq!(cps[2], cps[3]);
        assert_ne!(cps[0], cps[2]);
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let spec = ScenarioSpec::new(ScenarioId::S1, 100, LikelihoodKind::Ar1, 2, 9);
        let a = generate_scenario(&spec, 1);
        let b = generate_scenario(&spec, 1);
        assert_eq!(a.y, b.y);
        assert_ne!(generate_scenario(&spec, 0).y, a.y);
        assert_eq!(a.true_adjacency[1][2], true);
        let s2 = ScenarioSpec { scenario: ScenarioId::S2, ..spec };
        assert!(!s2.true_adjacency()[1][2] && s2.true_adjacency()[2][3]);
    }

    #[test]
    fn interval_brackets_mean() {
        let iv = Interval::from_samples(&[3.0, 1.0, 2.0, 10.0]).unwrap();
        assert!(iv.q05 <= iv.mean && iv.mean <= iv.q95);
        assert!(Interval::from_samples(&[]).is_none());
    }

    proptest! {
        #[test]
        fn auc_equals_pairwise_definition(scores in prop::collection::vec(0u8..5, 12), mask in 1u16..4095) {
            prop_assume!(mask.count_ones() < 12);
            let d = 4;
            let mut p = vec![vec![0.0; d]; d];
            let mut truth = vec![vec![false; d]; d];
            let mut flat = Vec::new();
            let mut k = 0;
            for i in 0..d {
                for j in (0..d).filter(|&j| j != i) {
                    p[i][j] = scores[k] as f64 / 4.0;
                    truth[i][j] = mask & (1 << k) != 0;
                    flat.push((p[i][j], truth[i][j]));
                    k += 1;
                }
            }
            let auc = link_auc(&p, &truth).unwrap();
            prop_assert!((auc - brute_auc(&flat)).abs() < 1e-12);
        }
    }
}
