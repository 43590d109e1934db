//! Invariant suites, one per acceptance criterion. Each suite records its
//! checks through a [`Recorder`]; `verify` and the acceptance test both run
//! them from here.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::report::{Check, Recorder};

mod algebra;
pub(crate) mod calculus;
mod lattice;

pub struct Ctx {
    pub seed: u64,
    /// Overrides keyed by `suite.check`.
    pub tolerances: BTreeMap<String, f64>,
}

impl Ctx {
    pub fn new(seed: u64) -> Self {
        Self { seed, tolerances: BTreeMap::new() }
    }

    /// Independent stream of the run generator.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    /// Seed for routines that take one, derived from the run seed.
    pub fn sub_seed(&self, stream: u64) -> u64 {
        use rand::RngCore;
        self.rng(stream).next_u64()
    }
}

type SuiteFn = fn(&Ctx, &mut Recorder) -> Result<()>;

pub struct Suite {
    pub name: &'static str,
    pub criterion: usize,
    pub title: &'static str,
    run: SuiteFn,
}

impl Suite {
    /// Runs the suite; an internal error becomes a failing `error` check.
    pub fn run(&self, ctx: &Ctx) -> Vec<Check> {
        let mut rec = Recorder::new(self.name, &ctx.tolerances);
        if let Err(e) = (self.run)(ctx, &mut rec) {
            rec.error(&e);
        }
        rec.finish()
    }
}

pub const SUITES: &[Suite] = &[
    Suite { name: "car", criterion: 1, title: "CAR relations and quasi-free n-point functions", run: algebra::car },
    Suite { name: "wick", criterion: 2, title: "Wick products, Gram form, KMS and the doubled oracle", run: algebra::wick_suite },
    Suite { name: "lp", criterion: 3, title: "twisted L^p norms", run: algebra::lp },
    Suite { name: "filtration", criterion: 4, title: "conditional expectations", run: algebra::filtration },
    Suite { name: "gbm", criterion: 5, title: "Grassmann Brownian martingale", run: calculus::gbm },
    Suite { name: "ito_isometry", criterion: 6, title: "Ito isometry", run: calculus::ito_isometry },
    Suite { name: "ito_formula", criterion: 7, title: "Ito formula refinement", run: calculus::ito_formula },
    Suite { name: "girsanov", criterion: 8, title: "Girsanov shift", run: calculus::girsanov },
    Suite { name: "sde", criterion: 9, title: "SDE strong and weak solutions", run: calculus::sde },
    Suite { name: "hyper", criterion: 10, title: "hypercontractivity", run: calculus::hyper },
    Suite { name: "phi4", criterion: 11, title: "phi^4 lattice diagnostics", run: lattice::phi4 },
    Suite { name: "spectral", criterion: 12, title: "spectral laws and moment bounds", run: algebra::spectral },
    Suite { name: "martingale", criterion: 13, title: "martingale-norm machinery", run: algebra::martingale },
];

pub fn find(name: &str) -> Option<&'static Suite> {
    SUITES.iter().find(|s| s.name == name)
}

pub fn names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.name).collect()
}

/// Runs the suites in parallel and returns their checks in input order.
pub fn run_all(ctx: &Ctx, suites: &[&Suite]) -> Vec<Check> {
    let per: Vec<Vec<Check>> = suites.par_iter().map(|s| s.run(ctx)).collect();
    per.into_iter().flatten().collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
