use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audit;
use crate::error::{Error, Result};
use crate::lp::{ConstraintFamily, LpMode};
use crate::mechanisms;
use crate::optimizer::{self, Baseline, BaselineGrid, HyperGrid, InputLaw, Problem};
use crate::quantizer::{exact_mae, monte_carlo_mae, BinLayout, Mechanism};

/// Published baseline configurations for uniform inputs with `c = 1`:
/// (eps, construction, bins, parameter).
pub const PUBLISHED_UNIFORM: [(f64, Baseline, [f64; 4], f64); 4] = [
    (1.0, Baseline::Erm, [-5.1, -0.1, 0.1, 5.1], 0.026),
    (1.0, Baseline::Rqm, [-2.7, -0.9, 0.9, 2.7], 0.22),
    (1.5, Baseline::Erm, [-2.7, -0.4, 0.4, 2.7], 0.043),
    (1.5, Baseline::Rqm, [-2.6, -0.87, 0.87, 2.6], 0.498),
];

/// Published RQM configuration for the truncated Gaussian table.
pub const PUBLISHED_GAUSSIAN_RQM: ([f64; 4], f64) = ([-2.7, -0.9, 0.9, 2.7], 0.22);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarConfig {
    pub c: f64,
    pub m: usize,
    pub eps_grid: Vec<f64>,
    pub family: ConstraintFamily,
    pub mc_trials: usize,
    pub seed: u64,
}

impl Default for ScalarConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            m: 4,
            eps_grid: vec![0.5, 1.0, 1.5],
            family: ConstraintFamily::Full,
            mc_trials: 100_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianConfig {
    pub c: f64,
    pub m: usize,
    pub eps: f64,
    pub mu: f64,
    pub sigmas: Vec<f64>,
    /// Samples used to estimate interval masses for the LP objective.
    pub n_samples: usize,
    pub mc_trials: usize,
    pub seed: u64,
}

impl Default for GaussianConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            m: 4,
            eps: 1.0,
            mu: 0.5,
            sigmas: vec![0.1, 0.2, 0.3],
            n_samples: 10_000,
            mc_trials: 100_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarRow {
    pub table: String,
    pub eps: f64,
    pub sigma: Option<f64>,
    pub mechanism: String,
    pub source: String,
    pub status: String,
    pub bins: String,
    pub param: Option<f64>,
    pub exact_mae: Option<f64>,
    pub mc_mae: Option<f64>,
    pub mc_se: Option<f64>,
    pub eps_audit: Option<f64>,
}

impl ScalarRow {
    fn na(table: &str, eps: f64, sigma: Option<f64>, mechanism: &str, source: &str) -> Self {
        Self {
            table: table.into(),
            eps,
            sigma,
            mechanism: mechanism.into(),
            source: source.into(),
            status: "N/A".into(),
            bins: String::new(),
            param: None,
            exact_mae: None,
            mc_mae: None,
            mc_se: None,
            eps_audit: None,
        }
    }

    pub fn is_available(&self) -> bool {
        self.status == "ok"
    }
}

struct RowSpec<'a> {
    table: &'a str,
    eps: f64,
    sigma: Option<f64>,
    mechanism: &'a str,
    source: &'a str,
    param: Option<f64>,
}

fn evaluated_row(
    spec: RowSpec,
    mech: &Mechanism,
    law: InputLaw,
    mc_trials: usize,
    seed: u64,
    stream: u64,
) -> Result<ScalarRow> {
    let dist = law.distribution(mech.layout())?;
    let mae = exact_mae(mech, &dist)?;
    let report = audit::empirical_epsilon(mech);
    let (mc, se) = if mc_trials > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let (a, b) = monte_carlo_mae(mech, &dist, mc_trials, &mut rng)?;
        (Some(a), Some(b))
    } else {
        (None, None)
    };
    Ok(ScalarRow {
        table: spec.table.into(),
        eps: spec.eps,
        sigma: spec.sigma,
        mechanism: spec.mechanism.into(),
        source: spec.source.into(),
        status: "ok".into(),
        bins: optimizer::format_bins(mech.layout().bins()),
        param: spec.param,
        exact_mae: Some(mae),
        mc_mae: mc,
        mc_se: se,
        eps_audit: Some(report.eps_emp),
    })
}

fn published(kind: Baseline, c: f64, bins: [f64; 4], param: f64) -> Result<Mechanism> {
    let delta = bins[3] - c;
    match kind {
        Baseline::Rqm => mechanisms::rqm(4, c, delta, param),
        Baseline::Erm => mechanisms::erm(BinLayout::new(c, delta, bins.to_vec())?, param),
    }
}

fn kind_name(kind: Baseline) -> &'static str {
    match kind {
        Baseline::Rqm => "rqm",
        Baseline::Erm => "erm",
    }
}

/// Uniform-input MAE table: the optimized mechanism and both baseline
/// families (grid-searched) at each eps, plus the published baseline
/// configurations where they exist.
pub fn table1(cfg: &ScalarConfig) -> Result<Vec<ScalarRow>> {
    if cfg.mc_trials == 0 && cfg.eps_grid.is_empty() {
        return Err(Error::Config("empty eps grid".into()));
    }
    let mut rows = Vec::new();
    let mut stream = 0u64;
    for &eps in &cfg.eps_grid {
        let problem = Problem::uniform(cfg.c, cfg.m, eps);
        let grid = HyperGrid::default_for(cfg.c, cfg.m, cfg.family, LpMode::Symmetric);
        let spec = |mechanism, source, param| RowSpec {
            table: "table1",
            eps,
            sigma: None,
            mechanism,
            source,
            param,
        };
        match optimizer::optm_outer(&problem, &grid) {
            Ok(r) => rows.push(evaluated_row(
                spec("optm", "grid_search", None),
                &r.mechanism,
                problem.law,
                cfg.mc_trials,
                cfg.seed,
                stream,
            )?),
            Err(Error::NoFeasibleMechanism(_)) => {
                rows.push(ScalarRow::na("table1", eps, None, "optm", "grid_search"))
            }
            Err(e) => return Err(e),
        }
        stream += 1;
        for kind in [Baseline::Rqm, Baseline::Erm] {
            match optimizer::baseline_search(kind, &problem, &BaselineGrid::default_for(kind)) {
                Ok(r) => rows.push(evaluated_row(
                    spec(kind_name(kind), "grid_search", Some(r.param)),
                    &r.mechanism,
                    problem.law,
                    cfg.mc_trials,
                    cfg.seed,
                    stream,
                )?),
                Err(Error::NoFeasibleMechanism(_)) => rows.push(ScalarRow::na(
                    "table1",
                    eps,
                    None,
                    kind_name(kind),
                    "grid_search",
                )),
                Err(e) => return Err(e),
            }
            stream += 1;
        }
        if cfg.m == 4 && cfg.c == 1.0 {
            for (e, kind, bins, param) in PUBLISHED_UNIFORM {
                if e == eps {
                    let mech = published(kind, cfg.c, bins, param)?;
                    rows.push(evaluated_row(
                        spec(kind_name(kind), "published", Some(param)),
                        &mech,
                        problem.law,
                        cfg.mc_trials,
                        cfg.seed,
                        stream,
                    )?);
                    stream += 1;
                }
            }
        }
    }
    Ok(rows)
}

/// Draws `n` seeded samples from the truncated Gaussian on `[-c, c]`.
pub fn gaussian_samples(c: f64, mu: f64, sigma: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let layout = BinLayout::new(c, c, vec![-2.0 * c, 2.0 * c])?;
    let law = InputLaw::TruncatedGaussian { mu, sigma };
    let dist = law.distribution(&layout)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}

/// Truncated-Gaussian MAE table: the optimized mechanism in general mode
/// (asymmetric layouts, objective masses estimated from samples) against
/// the published RQM configuration and the RQM family search.
pub fn table2(cfg: &GaussianConfig) -> Result<Vec<ScalarRow>> {
    let mut rows = Vec::new();
    let mut stream = 1000u64;
    for &sigma in &cfg.sigmas {
        let law = InputLaw::TruncatedGaussian { mu: cfg.mu, sigma };
        let samples = gaussian_samples(cfg.c, cfg.mu, sigma, cfg.n_samples, cfg.seed)?;
        let problem = Problem {
            c: cfg.c,
            m: cfg.m,
            eps: cfg.eps,
            law,
            samples: Some(samples),
        };
        let grid = HyperGrid::default_for(cfg.c, cfg.m, ConstraintFamily::Full, LpMode::General);
        let eps = cfg.eps;
        let spec = |mechanism, source, param| RowSpec {
            table: "table2",
            eps,
            sigma: Some(sigma),
            mechanism,
            source,
            param,
        };
        match optimizer::optm_outer(&problem, &grid) {
            Ok(r) => rows.push(evaluated_row(
                spec("optm", "grid_search", None),
                &r.mechanism,
                law,
                cfg.mc_trials,
                cfg.seed,
                stream,
            )?),
            Err(Error::NoFeasibleMechanism(_)) => rows.push(ScalarRow::na(
                "table2",
                eps,
                Some(sigma),
                "optm",
                "grid_search",
            )),
            Err(e) => return Err(e),
        }
        stream += 1;
        match optimizer::baseline_search(
            Baseline::Rqm,
            &problem,
            &BaselineGrid::default_for(Baseline::Rqm),
        ) {
            Ok(r) => rows.push(evaluated_row(
                spec("rqm", "grid_search", Some(r.param)),
                &r.mechanism,
                law,
                cfg.mc_trials,
                cfg.seed,
                stream,
            )?),
            Err(Error::NoFeasibleMechanism(_)) => rows.push(ScalarRow::na(
                "table2",
                eps,
                Some(sigma),
                "rqm",
                "grid_search",
            )),
            Err(e) => return Err(e),
        }
        stream += 1;
        if cfg.m == 4 && cfg.c == 1.0 && cfg.eps == 1.0 {
            let (bins, q) = PUBLISHED_GAUSSIAN_RQM;
            let mech = published(Baseline::Rqm, cfg.c, bins, q)?;
            rows.push(evaluated_row(
                spec("rqm", "published", Some(q)),
                &mech,
                law,
                cfg.mc_trials,
                cfg.seed,
                stream,
            )?);
            stream += 1;
        }
    }
    Ok(rows)
}
