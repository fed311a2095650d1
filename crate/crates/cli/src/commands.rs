//! One function per subcommand. Each returns its report sections and
//! whether every verdict it is responsible for held.

use serde_json::{Map, Value};

use mdlsys::applications::{beurling_lax, dilate, DilationReport, SubspaceBasis};
use mdlsys::kernels::{kernel_gram, nc_kernel_coefficient_gram, KernelFlavor, KernelHandle};
use mdlsys::numerics::{psd_check, scaled_tol, spectral_norm};
use mdlsys::sampling::{ball_points, seeded};
use mdlsys::spaces::{gleason_check, gleason_from_pair};
use mdlsys::stein::{
    ab_gramian, c_abelian_defect, nc_gramian, observability_analysis, q_stein_analysis,
    reverse_stein_residual, stein_solve, strong_stability, SteinSolveMode, DEFAULT_MAX_LEVEL,
};
use mdlsys::systems::{
    commutativity_defect, is_commutative, lattice_simulate, nc_simulate, project_inputs,
    project_trajectory, LatticeTrajectory, Mode, NcTrajectory, SystemRealization,
};

use crate::canonical::{complex, matrix, num, obj, reals, vector};
use crate::error::CliError;
use crate::input::{self, Subspace};
use crate::report::{gramian, multi_index_key, multiplier, opt_num, verdict, Checks};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeSel {
    Nc,
    Commutative,
    Both,
}

impl ModeSel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModeSel::Nc => "nc",
            ModeSel::Commutative => "commutative",
            ModeSel::Both => "both",
        }
    }

    pub fn nc(&self) -> bool {
        *self != ModeSel::Commutative
    }

    pub fn commutative(&self) -> bool {
        *self != ModeSel::Nc
    }
}

pub struct Options {
    pub truncation: usize,
    pub tol: f64,
    pub mode: ModeSel,
    pub seed: u64,
    pub params: Vec<(String, String)>,
}

pub struct Outcome {
    pub sections: Map<String, Value>,
    pub pass: bool,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            sections: Map::new(),
            pass: true,
        }
    }

    fn put(&mut self, key: &str, value: Value) {
        self.sections.insert(key.into(), value);
    }
}

fn load_system(path: &str, opts: &Options) -> Result<SystemRealization, CliError> {
    let doc = input::read(path)?;
    let params = input::params(&doc, &opts.params)?;
    input::system(&doc, &params)
}

fn system_summary(sys: &SystemRealization, tol: f64) -> Result<Value, CliError> {
    let pair = &sys.pair;
    let contractive = psd_check(&pair.contractivity_defect(), tol)?;
    Ok(obj([
        ("d", pair.d().into()),
        ("stateDim", pair.state_dim().into()),
        ("outputDim", pair.output_dim().into()),
        ("inputDim", sys.input_dim().into()),
        ("commutative", is_commutative(&pair.a, tol).into()),
        ("commutativityDefect", num(commutativity_defect(&pair.a))),
        ("contractive", verdict(&contractive)),
    ]))
}

pub fn analyze(path: &str, depth: usize, opts: &Options) -> Result<Outcome, CliError> {
    let sys = load_system(path, opts)?;
    let pair = &sys.pair;
    let tol = opts.tol;
    let mut out = Outcome::new();
    out.put("system", system_summary(&sys, tol)?);

    let stab = strong_stability(&pair.a, None, DEFAULT_MAX_LEVEL, tol);
    out.put(
        "strongStability",
        obj([
            ("verdict", stab.verdict.as_str().into()),
            ("certifiedRatio", opt_num(stab.certified_ratio)),
            ("levelsUsed", (stab.levels.len() - 1).into()),
            (
                "finalLevel",
                num(stab.levels.last().copied().unwrap_or(0.0)),
            ),
            ("tolerance", num(tol)),
        ]),
    );

    let mut gramians = Map::new();
    if opts.mode.nc() {
        gramians.insert(
            "nc".into(),
            gramian(&nc_gramian(pair, DEFAULT_MAX_LEVEL, tol)),
        );
    }
    let ga = ab_gramian(pair, DEFAULT_MAX_LEVEL, tol);
    if opts.mode.commutative() {
        gramians.insert("commutative".into(), gramian(&ga));
        let rs = match reverse_stein_residual(pair, &ga, tol) {
            Ok(rs) => obj([
                ("residual", matrix(&rs.residual)),
                ("steinDifference", matrix(&rs.stein_difference)),
                ("residualPsd", verdict(&rs.verdict)),
            ]),
            Err(e) => obj([("error", e.to_string().into())]),
        };
        out.put("reverseStein", rs);
    }
    out.put("gramians", Value::Object(gramians));

    let obs = observability_analysis(pair, opts.truncation, tol);
    out.put(
        "observability",
        obj([
            ("observable", obs.observable.into()),
            ("exactlyObservable", obs.exactly_observable.into()),
            ("aObservable", obs.a_observable.into()),
            ("exactlyAObservable", obs.exactly_a_observable.into()),
            ("unobservableBasis", matrix(&obs.unobservable_basis)),
            ("aUnobservableBasis", matrix(&obs.a_unobservable_basis)),
            ("rankByLength", obs.rank_by_length.clone().into()),
            ("aRankByDegree", obs.a_rank_by_degree.clone().into()),
            ("aSpanStabilizedAt", obs.a_span_stabilized_at.into()),
            ("kernelContained", obs.kernel_contained.into()),
            (
                "kernelContainmentResidual",
                num(obs.kernel_containment_residual),
            ),
            ("tolerance", num(tol)),
        ]),
    );

    let solve = stein_solve(pair, SteinSolveMode::Equation, tol)?;
    out.put(
        "steinEquation",
        obj([
            (
                "solution",
                solve.solution.as_ref().map(matrix).unwrap_or(Value::Null),
            ),
            ("residual", num(solve.residual)),
            ("nullSpaceDim", solve.null_space_dim.into()),
            (
                "solutionMinEigenvalue",
                opt_num(solve.solution_min_eigenvalue),
            ),
            ("contractive", solve.contractive.into()),
            ("stronglyStable", solve.strongly_stable.as_str().into()),
            ("unique", solve.unique.into()),
            ("tolerance", num(tol)),
        ]),
    );

    let q = match q_stein_analysis(pair, tol) {
        Ok(q) => obj([
            ("q", matrix(&q.q)),
            ("inequality", verdict(&q.inequality)),
            ("equalityResidual", num(q.equality_residual)),
            ("equalityHolds", q.equality_holds.into()),
            (
                "gramianBelowQ",
                q.gramian_below_q.map(Value::Bool).unwrap_or(Value::Null),
            ),
            ("qBelowIdentity", q.q_below_identity.into()),
            ("kernelDim", q.kernel_dim.into()),
            ("lowerLeftResidual", num(q.lower_left_residual)),
            ("upperRightNorm", num(q.upper_right_norm)),
            (
                "restrictedIsometryResidual",
                num(q.restricted_isometry_residual),
            ),
            ("restrictedIsometric", q.restricted_isometric.into()),
            ("tolerance", num(tol)),
        ]),
        Err(e) => obj([("error", e.to_string().into())]),
    };
    out.put("qStein", q);

    let defect = c_abelian_defect(pair, depth)?;
    let scale = spectral_norm(&pair.c);
    out.put(
        "cAbelian",
        obj([
            ("depth", depth.into()),
            ("defect", num(defect)),
            ("holds", (defect <= scaled_tol(tol, scale)).into()),
            ("tolerance", num(scaled_tol(tol, scale))),
        ]),
    );
    Ok(out)
}

fn nc_trajectory_value(t: &NcTrajectory) -> Value {
    let mut states = Map::new();
    let mut outputs = Map::new();
    for w in t.words() {
        states.insert(w.to_string(), vector(t.state(&w)));
        outputs.insert(w.to_string(), vector(t.output(&w)));
    }
    obj([
        ("states", Value::Object(states)),
        ("outputs", Value::Object(outputs)),
    ])
}

fn lattice_value(t: &LatticeTrajectory) -> Value {
    let keyed = |m: &std::collections::BTreeMap<
        mdlsys::combinatorics::MultiIndex,
        mdlsys::numerics::CVec,
    >| {
        Value::Object(
            m.iter()
                .map(|(n, v)| (multi_index_key(n), vector(v)))
                .collect(),
        )
    };
    obj([("states", keyed(&t.states)), ("outputs", keyed(&t.outputs))])
}

pub fn simulate(
    system: &str,
    inputs: &str,
    depth: usize,
    opts: &Options,
) -> Result<Outcome, CliError> {
    let sys = load_system(system, opts)?;
    let doc = input::read(inputs)?;
    let params = input::params(&doc, &opts.params)?;
    let sim = input::simulation_input(&doc, &params, sys.pair.d())?;
    let mut out = Outcome::new();
    out.put("depth", depth.into());
    let nc = if opts.mode.nc() || sim.lattice.is_none() {
        Some(nc_simulate(&sys, &sim.x0, &sim.words, depth)?)
    } else {
        None
    };
    if opts.mode.nc() {
        if let Some(t) = &nc {
            out.put("nc", nc_trajectory_value(t));
        }
    }
    if opts.mode.commutative() {
        let lattice_inputs = sim
            .lattice
            .clone()
            .unwrap_or_else(|| project_inputs(&sim.words));
        let lattice = lattice_simulate(&sys, &sim.x0, &lattice_inputs, depth)?;
        out.put("commutative", lattice_value(&lattice));
        if opts.mode == ModeSel::Both {
            // abelianize the word trajectory and compare with the lattice run
            let projected = project_trajectory(nc.as_ref().expect("nc run present in both mode"));
            let residual = projected.max_difference(&lattice);
            let scale = lattice
                .states
                .values()
                .chain(lattice.outputs.values())
                .map(|v| v.iter().map(|z| z.norm()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            let tol = scaled_tol(opts.tol, scale);
            let mut checks = Checks::new();
            checks.at_most("projectionResidual", residual, tol);
            checks.flag(
                "latticeInputsProjected",
                sim.lattice.is_none(),
                sim.lattice.is_none().into(),
            );
            out.pass &= residual <= tol;
            out.put("projectionDiagram", checks.into_value());
        }
    }
    Ok(out)
}

pub fn kernel(
    system: &str,
    points: Option<&str>,
    samples: usize,
    depth: usize,
    inverse_gramian: bool,
    opts: &Options,
) -> Result<Outcome, CliError> {
    let sys = load_system(system, opts)?;
    let pair = sys.pair;
    let tol = opts.tol;
    let mut out = Outcome::new();
    if opts.mode.nc() {
        let kh = KernelHandle::new(pair.clone(), None, KernelFlavor::Noncommutative, tol)?;
        let gram = nc_kernel_coefficient_gram(&kh, depth)?;
        let v = psd_check(&gram, scaled_tol(tol, spectral_norm(&gram)))?;
        out.pass &= v.is_psd;
        out.put(
            "nc",
            obj([
                ("depth", depth.into()),
                ("size", gram.nrows().into()),
                ("gramPsd", verdict(&v)),
            ]),
        );
    }
    if opts.mode.commutative() {
        let pts = match points {
            Some(path) => {
                let doc = input::read(path)?;
                let params = input::params(&doc, &opts.params)?;
                input::points(&doc, &params, pair.d())?
            }
            None => ball_points(&mut seeded(opts.seed), pair.d(), samples, 0.9),
        };
        for p in &pts {
            let r2: f64 = p.iter().map(|z| z.norm_sqr()).sum();
            if r2 >= 1.0 {
                return Err(CliError::Input(format!(
                    "point {p:?} is outside the open unit ball"
                )));
            }
        }
        let flavor = if inverse_gramian {
            KernelFlavor::CommutativeInverseGramian
        } else {
            KernelFlavor::Commutative
        };
        let kh = KernelHandle::new(pair, None, flavor, tol)?;
        let gram = mdlsys::kernels::kernel_gram_matrix(&kh, &pts)?;
        let v = kernel_gram(&kh, &pts, scaled_tol(tol, spectral_norm(&gram)))?;
        out.pass &= v.is_psd;
        out.put(
            "commutative",
            obj([
                (
                    "flavor",
                    (if inverse_gramian {
                        "inverse-gramian"
                    } else {
                        "identity-weight"
                    })
                    .into(),
                ),
                (
                    "points",
                    Value::Array(
                        pts.iter()
                            .map(|p| Value::Array(p.iter().map(|z| complex(*z)).collect()))
                            .collect(),
                    ),
                ),
                ("gram", matrix(&gram)),
                ("gramPsd", verdict(&v)),
            ]),
        );
    }
    Ok(out)
}

pub fn gleason(system: &str, opts: &Options) -> Result<Outcome, CliError> {
    let sys = load_system(system, opts)?;
    let tol = opts.tol;
    let mut out = Outcome::new();
    let sol = match gleason_from_pair(&sys.pair, opts.truncation, tol).map_err(CliError::from) {
        Ok(sol) => sol,
        Err(e) if !e.is_hypothesis_failure() => return Err(e),
        Err(e) => {
            out.pass = false;
            out.put("gleason", obj([("error", e.to_string().into())]));
            return Ok(out);
        }
    };
    let check = gleason_check(&sol, tol)?;
    let residual = check.coefficient_residual.max(sol.sample_residual);
    // contractivity is reported, not required: a solution need not be contractive
    out.pass = check.solves;
    out.put(
        "gleason",
        obj([
            ("degree", opts.truncation.into()),
            ("dimension", sol.basis.len().into()),
            ("t", Value::Array(sol.t.iter().map(matrix).collect())),
            ("c", matrix(&sol.c)),
            ("gram", matrix(&sol.gram)),
            ("solves", check.solves.into()),
            ("residual", num(residual)),
            ("coefficientResidual", num(check.coefficient_residual)),
            ("sampleResidual", num(sol.sample_residual)),
            ("contractive", check.contractive.into()),
            ("contractivityMargin", num(check.contractivity_margin)),
            ("equalsBackshift", check.equals_backshift.into()),
            ("backshiftResidual", num(check.backshift_residual)),
            ("backshiftInvariant", check.backshift_invariant.into()),
            ("invarianceResidual", num(check.invariance_residual)),
            ("tolerance", num(tol)),
        ]),
    );
    Ok(out)
}

fn dilation_value(rep: &DilationReport, tol: f64) -> (Value, bool) {
    let worst_compression = rep
        .compression_residuals
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let allowance = rep.tail_bound + rep.rounding_allowance;
    let compression_tol = scaled_tol(tol, 1.0).max(allowance);
    let ok = rep.row_contraction
        && rep.isometric_within_tail()
        && rep.intertwining_residual <= scaled_tol(tol, 1.0)
        && worst_compression <= compression_tol;
    let v = obj([
        ("truncation", rep.truncation.into()),
        ("defect", matrix(&rep.defect)),
        ("coefficientSpaceDim", rep.coefficient_space_dim.into()),
        ("rowContraction", rep.row_contraction.into()),
        (
            "commuting",
            rep.commuting.map(Value::Bool).unwrap_or(Value::Null),
        ),
        ("adjointStability", rep.adjoint_stability.as_str().into()),
        ("rho", num(rep.rho)),
        ("gramian", matrix(&rep.gramian)),
        ("obsIsometryResidual", num(rep.obs_isometry_residual)),
        ("tailBound", num(rep.tail_bound)),
        ("roundingAllowance", num(rep.rounding_allowance)),
        ("isometricWithinTail", rep.isometric_within_tail().into()),
        ("intertwiningResidual", num(rep.intertwining_residual)),
        ("compressionResiduals", reals(&rep.compression_residuals)),
        ("compressionTolerance", num(compression_tol)),
        (
            "explicitCompressionCheck",
            num(rep.explicit_compression_check),
        ),
        ("tolerance", num(tol)),
        ("pass", ok.into()),
    ]);
    (v, ok)
}

pub fn dilate_cmd(path: &str, opts: &Options) -> Result<Outcome, CliError> {
    let doc = input::read(path)?;
    let params = input::params(&doc, &opts.params)?;
    let t = input::tuple(&doc, &params)?;
    let mut out = Outcome::new();
    let mut modes = Vec::new();
    if opts.mode.nc() {
        modes.push(Mode::Nc);
    }
    if opts.mode.commutative() {
        modes.push(Mode::Commutative);
    }
    for mode in modes {
        match dilate(&t, mode, opts.truncation, opts.tol).map_err(CliError::from) {
            Ok(rep) => {
                let (v, ok) = dilation_value(&rep, opts.tol);
                out.pass &= ok;
                out.put(mode.as_str(), v);
            }
            Err(e) if e.is_hypothesis_failure() => {
                out.pass = false;
                out.put(
                    mode.as_str(),
                    obj([("error", e.to_string().into()), ("pass", false.into())]),
                );
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn beurling_lax_cmd(path: &str, opts: &Options) -> Result<Outcome, CliError> {
    let doc = input::read(path)?;
    let params = input::params(&doc, &opts.params)?;
    let basis = match input::subspace(&doc, &params)? {
        Subspace::Fock(b) => SubspaceBasis::Fock(b),
        Subspace::Ball(b) => SubspaceBasis::Ball(b),
    };
    let tol = opts.tol;
    let rep = beurling_lax(&basis, tol)?;
    let invariant_tol = scaled_tol(tol, 1.0);
    let mut checks = Checks::new();
    checks.at_most(
        "shiftInvariance",
        rep.shift_invariance_residual,
        invariant_tol,
    );
    checks.flag(
        "rowContractive",
        rep.row_contractive,
        rep.row_contractive.into(),
    );
    checks.flag(
        "withinUnitBall",
        rep.within_unit_ball,
        rep.within_unit_ball.into(),
    );
    checks.flag(
        "partialIsometry",
        rep.partial_isometry(tol),
        num(rep.partial_isometry_residual),
    );
    checks.flag("spansSubspace", rep.spans_subspace, num(rep.range_residual));
    let mut out = Outcome::new();
    out.pass = checks.pass;
    out.put(
        "beurlingLax",
        obj([
            ("mode", rep.mode.as_str().into()),
            ("depth", rep.depth.into()),
            ("subspaceDim", rep.subspace_dim.into()),
            (
                "shiftInvarianceResidual",
                num(rep.shift_invariance_residual),
            ),
            ("adjointStability", rep.adjoint_stability.as_str().into()),
            ("c", matrix(&rep.pair.c)),
            ("a", Value::Array(rep.pair.a.iter().map(matrix).collect())),
            ("theta", multiplier(&rep.theta)),
            ("isometryResidual", num(rep.isometry_residual)),
            (
                "partialIsometryResidual",
                num(rep.partial_isometry_residual),
            ),
            ("rangeResidual", num(rep.range_residual)),
            ("projectionResidual", num(rep.projection_residual)),
            ("checks", checks.into_value()),
            ("tolerance", num(tol)),
        ]),
    );
    Ok(out)
}
