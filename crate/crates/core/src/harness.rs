//! Scenario files, presets, Monte Carlo orchestration and reporting.

use std::fmt::{self, Write as _};
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::Strategy;
use crate::error::{Error, Result};
use crate::fr::{run_fixed_trial, FixedDecoder, FixedRateCode};
use crate::par::{map_indexed, Execution};
use crate::prob::{ConditionalPmf, JointPmf, SubsetView};
use crate::region::{
    closed_form_t, known_intersections, r_star_general, r_star_perfect_with, FixedKind, GeneralOptions,
    HonestCollection, InfoModel,
};
use crate::scenario::Scenario;
use crate::source::derive_rng;
use crate::vr::{run_session, ProtocolParams, SessionReport};

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: &str = "schema_version,trial,mode,honest_error,error_rounds,sum_rate,overhead_rate,\
final_v_size,final_v,over_budget_rounds,v_failures,disagreements,attack_found,failure";

pub const PRESETS: [&str; 5] = ["three-sensor", "three-sensor-converse", "independent", "four-sensor-plurality", "pair"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub source: SourceSpec,
    pub honest: HonestSpec,
    pub info: InfoSpec,
    pub strategy: StrategySpec,
    pub variable_rate: VrSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_rate: Option<FrSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub alphabet_sizes: Vec<usize>,
    /// Row-major joint table, last sensor fastest.
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HonestSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sets: Option<Vec<Vec<usize>>>,
    pub true_set: Vec<usize>,
    #[serde(default)]
    pub true_channel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InfoSpec {
    Perfect,
    /// `tables[k][j]` is channel `j` of candidate `k`, rows flattened.
    Channels { w_size: usize, tables: Vec<Vec<Vec<f64>>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    Honest,
    BlackHole,
    /// Without `qbar` the traitors use the law achieving `R*`.
    FakeDistribution {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        qbar: Option<Vec<f64>>,
    },
    FixedRateAmbiguity {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VrSpec {
    pub n: usize,
    pub rounds: usize,
    pub eps: f64,
    pub nu: f64,
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
    pub alpha: f64,
    pub search_guard_bits: f64,
}

impl From<&ProtocolParams> for VrSpec {
    fn from(p: &ProtocolParams) -> Self {
        VrSpec {
            n: p.n,
            rounds: p.rounds,
            eps: p.eps,
            nu: p.nu,
            eta: p.eta,
            c: p.c,
            alpha: p.alpha,
            search_guard_bits: p.search_guard_bits,
        }
    }
}

impl From<&VrSpec> for ProtocolParams {
    fn from(v: &VrSpec) -> Self {
        ProtocolParams {
            n: v.n,
            rounds: v.rounds,
            eps: v.eps,
            nu: v.nu,
            eta: v.eta,
            c: v.c,
            alpha: v.alpha,
            search_guard_bits: v.search_guard_bits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrSpec {
    pub rates: Vec<f64>,
    pub n: usize,
    pub kind: FixedKind,
    pub c: usize,
    pub eps: f64,
    pub plurality: bool,
    pub guard_bits: f64,
}

/// A validated, ready-to-run experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub file: ScenarioFile,
    pub scenario: Scenario,
    pub params: ProtocolParams,
    pub fixed: Option<FixedRateCode>,
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: ScenarioFile = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        if f.schema_version != SCHEMA_VERSION {
            return Err(Error::Scenario(format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                f.schema_version
            )));
        }
        Ok(f)
    }

    /// Canonical text: fixed key order, no comments.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn collection(&self) -> Result<HonestCollection> {
        let m = self.source.alphabet_sizes.len();
        match (&self.honest.threshold, &self.honest.sets) {
            (Some(t), None) => HonestCollection::threshold(m, *t),
            (None, Some(sets)) => HonestCollection::new(
                m,
                sets.iter().map(|s| SubsetView::from_unsorted(s.clone(), m)).collect::<Result<_>>()?,
            ),
            _ => Err(Error::Scenario("give exactly one of honest.threshold and honest.sets".into())),
        }
    }

    pub fn build(&self) -> Result<Experiment> {
        let p = JointPmf::new(self.source.alphabet_sizes.clone(), self.source.p.clone())?;
        let m = p.m();
        let h = self.collection()?;
        let info = match &self.info {
            InfoSpec::Perfect => InfoModel::perfect(&h, p.sizes()),
            InfoSpec::Channels { w_size, tables } => {
                let channels = tables
                    .iter()
                    .map(|per| {
                        per.iter()
                            .map(|rows| ConditionalPmf::new(p.sizes().to_vec(), *w_size, rows.clone()))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                InfoModel::new(&h, p.sizes(), channels)?
            }
        };
        let h_true = SubsetView::from_unsorted(self.honest.true_set.clone(), m)?;
        let base = Scenario::new(p.clone(), h.clone(), info.clone(), h_true.clone(), self.honest.true_channel, Strategy::HonestPassthrough)?;
        let strategy = match &self.strategy {
            StrategySpec::Honest => Strategy::HonestPassthrough,
            StrategySpec::BlackHole => Strategy::BlackHole,
            StrategySpec::FakeDistribution { qbar } => {
                let w = base.true_channel().output_size();
                let out = p.alphabet_size(&base.traitors());
                let rows = match qbar {
                    Some(rows) => rows.clone(),
                    None => {
                        let opts = GeneralOptions { seed: self.seed, ..Default::default() };
                        r_star_general(&p, &h, &info, &h_true, base.true_channel(), opts)?.qbar
                    }
                };
                Strategy::FakeDistribution(ConditionalPmf::new(vec![w], out, rows)?)
            }
            StrategySpec::FixedRateAmbiguity { target } => Strategy::FixedRateAmbiguity {
                target: target.as_ref().map(|t| SubsetView::from_unsorted(t.clone(), m)).transpose()?,
            },
        };
        let scenario = Scenario::new(p, h, info, h_true, self.honest.true_channel, strategy)?;
        let params = ProtocolParams::from(&self.variable_rate);
        params.validate()?;
        let fixed = self
            .fixed_rate
            .as_ref()
            .map(|f| {
                let code = FixedRateCode {
                    rates: f.rates.clone(),
                    n: f.n,
                    kind: f.kind,
                    c_count: f.c,
                    seed: derive_rng(self.seed, "codebook", 1).gen(),
                    eps: f.eps,
                    plurality: f.plurality,
                    guard_bits: f.guard_bits,
                };
                code.validate(scenario.p.sizes()).map(|_| code)
            })
            .transpose()?;
        Ok(Experiment { file: self.clone(), scenario, params, fixed })
    }
}

/// Shared bit `B`; `X1 = B`, `X2 = B ⊕ Bern(.3)`, `X3 = B ⊕ Bern(.05)`.
pub fn three_sensor_law() -> JointPmf {
    shared_bit_law(&[0.0, 0.3, 0.05])
}

/// `X_i = B ⊕ Z_i` with independent `Z_i ~ Bern(flips[i])`.
pub fn shared_bit_law(flips: &[f64]) -> JointPmf {
    let m = flips.len();
    let mut w = vec![0.0; 1 << m];
    for b in 0..2usize {
        for z in 0..1usize << m {
            let mut pr = 0.5;
            let mut cell = 0;
            for (i, &f) in flips.iter().enumerate() {
                let zi = z >> (m - 1 - i) & 1;
                pr *= if zi == 1 { f } else { 1.0 - f };
                cell = cell * 2 + (b ^ zi);
            }
            w[cell] += pr;
        }
    }
    JointPmf::new(vec![2; m], w).expect("a valid law")
}

fn vr_defaults(eta: f64) -> VrSpec {
    VrSpec { eta, ..VrSpec::from(&ProtocolParams::default()) }
}

/// Rates `(H(X1|X2), H(X2), H(X3|X2))` of the three-sensor law.
pub fn three_sensor_corner() -> Vec<f64> {
    let p = three_sensor_law();
    let s = |v: Vec<usize>| SubsetView::new(v, 3).expect("subset");
    let h2 = p.entropy(&s(vec![1]));
    vec![p.entropy(&s(vec![0, 1])) - h2, h2, p.entropy(&s(vec![1, 2])) - h2]
}

pub fn preset(name: &str) -> Result<ScenarioFile> {
    let three = three_sensor_law();
    let file = match name {
        "three-sensor" => ScenarioFile {
            schema_version: SCHEMA_VERSION,
            name: name.into(),
            seed: 1,
            trials: 100,
            source: SourceSpec { alphabet_sizes: vec![2; 3], p: three.mass().to_vec() },
            honest: HonestSpec { threshold: Some(1), sets: None, true_set: vec![1, 2], true_channel: 0 },
            info: InfoSpec::Perfect,
            strategy: StrategySpec::FakeDistribution { qbar: None },
            variable_rate: vr_defaults(3.5),
            fixed_rate: Some(FrSpec {
                rates: three_sensor_corner().iter().map(|r| r + 0.1).collect(),
                n: 14,
                kind: FixedKind::Randomized,
                c: 8,
                eps: 1.5,
                plurality: false,
                guard_bits: 22.0,
            }),
        },
        "three-sensor-converse" => ScenarioFile {
            name: name.into(),
            trials: 200,
            strategy: StrategySpec::FixedRateAmbiguity { target: None },
            fixed_rate: Some(FrSpec {
                rates: three_sensor_corner(),
                n: 14,
                kind: FixedKind::Deterministic,
                c: 1,
                eps: 1.5,
                plurality: false,
                guard_bits: 22.0,
            }),
            ..preset("three-sensor")?
        },
        "independent" => ScenarioFile {
            schema_version: SCHEMA_VERSION,
            name: name.into(),
            seed: 3,
            trials: 100,
            source: SourceSpec { alphabet_sizes: vec![2; 3], p: three.mass().to_vec() },
            honest: HonestSpec { threshold: Some(2), sets: None, true_set: vec![0], true_channel: 0 },
            info: InfoSpec::Perfect,
            strategy: StrategySpec::BlackHole,
            variable_rate: vr_defaults(3.5),
            fixed_rate: Some(FrSpec {
                rates: vec![1.0; 3],
                n: 14,
                kind: FixedKind::Deterministic,
                c: 1,
                eps: 1.5,
                plurality: false,
                guard_bits: 22.0,
            }),
        },
        "four-sensor-plurality" => {
            let p = shared_bit_law(&[0.05, 0.05, 0.05, 0.05]);
            ScenarioFile {
                schema_version: SCHEMA_VERSION,
                name: name.into(),
                seed: 4,
                trials: 100,
                source: SourceSpec { alphabet_sizes: vec![2; 4], p: p.mass().to_vec() },
                honest: HonestSpec { threshold: Some(1), sets: None, true_set: vec![1, 2, 3], true_channel: 0 },
                info: InfoSpec::Perfect,
                strategy: StrategySpec::FakeDistribution { qbar: None },
                variable_rate: vr_defaults(7.0),
                fixed_rate: Some(FrSpec {
                    rates: vec![1.0; 4],
                    n: 14,
                    kind: FixedKind::Deterministic,
                    c: 1,
                    eps: 2.0,
                    plurality: true,
                    guard_bits: 22.0,
                }),
            }
        }
        "pair" => ScenarioFile {
            schema_version: SCHEMA_VERSION,
            name: name.into(),
            seed: 5,
            trials: 100,
            source: SourceSpec { alphabet_sizes: vec![2, 2], p: vec![0.45, 0.05, 0.05, 0.45] },
            honest: HonestSpec { threshold: Some(0), sets: None, true_set: vec![0, 1], true_channel: 0 },
            info: InfoSpec::Perfect,
            strategy: StrategySpec::Honest,
            variable_rate: vr_defaults(0.7),
            fixed_rate: None,
        },
        other => {
            return Err(Error::Scenario(format!("unknown preset {other:?}; known: {}", PRESETS.join(", "))))
        }
    };
    Ok(file)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    pub mode: &'static str,
    pub honest_error: bool,
    pub error_rounds: usize,
    pub sum_rate: f64,
    pub overhead_rate: f64,
    pub final_v: Vec<SubsetView>,
    pub over_budget_rounds: usize,
    pub v_failures: usize,
    pub disagreements: usize,
    pub attack_found: Option<bool>,
    /// Set when the trial hit a guard or another error.
    pub failure: Option<String>,
}

impl TrialRow {
    fn failed(trial: usize, mode: &'static str, e: &Error) -> Self {
        TrialRow {
            trial,
            mode,
            honest_error: true,
            error_rounds: 0,
            sum_rate: 0.0,
            overhead_rate: 0.0,
            final_v: Vec::new(),
            over_budget_rounds: 0,
            v_failures: 0,
            disagreements: 0,
            attack_found: None,
            failure: Some(e.to_string()),
        }
    }

    pub fn csv_line(&self) -> String {
        let v: Vec<String> = self.final_v.iter().map(ToString::to_string).collect();
        format!(
            "{SCHEMA_VERSION},{},{},{},{},{:.9},{:.9},{},\"{}\",{},{},{},{},\"{}\"",
            self.trial,
            self.mode,
            u8::from(self.honest_error),
            self.error_rounds,
            self.sum_rate,
            self.overhead_rate,
            self.final_v.len(),
            v.join(" "),
            self.over_budget_rounds,
            self.v_failures,
            self.disagreements,
            self.attack_found.map_or(String::new(), |a| u8::from(a).to_string()),
            self.failure.as_deref().unwrap_or("").replace('"', "'"),
        )
    }
}

/// Seed of trial `t` under master seed `seed`.
pub fn trial_seed(seed: u64, t: usize) -> u64 {
    derive_rng(seed, "trial", t as u64).gen()
}

/// The sum-rate benchmark `R*` for the experiment's true pair.
pub fn rate_bound(exp: &Experiment) -> Result<f64> {
    let s = &exp.scenario;
    if s.info.is_perfect() {
        Ok(r_star_perfect_with(&s.p, &s.h, Execution::Sequential)?.r_star)
    } else {
        let opts = GeneralOptions { seed: exp.file.seed, ..Default::default() };
        Ok(r_star_general(&s.p, &s.h, &s.info, &s.h_true, s.true_channel(), opts)?.value)
    }
}

pub struct VrRun {
    pub rows: Vec<TrialRow>,
    pub sessions: Vec<Option<SessionReport>>,
}

pub fn run_vr(exp: &Experiment, trials: usize, seed: u64, exec: Execution) -> Result<VrRun> {
    let bound = rate_bound(exp)?;
    let m = exp.scenario.m();
    let params = &exp.params;
    let out = map_indexed(exec, trials, |t| match run_session(&exp.scenario, params, trial_seed(seed, t)) {
        Ok(rep) => {
            let row = TrialRow {
                trial: t,
                mode: "vr",
                honest_error: rep.any_honest_error(),
                error_rounds: rep.honest_errors(),
                sum_rate: rep.sum_rate,
                overhead_rate: rep.overhead_rate,
                final_v: rep.final_v().iter().map(|&k| exp.scenario.h.candidates()[k].clone()).collect(),
                over_budget_rounds: rep.over_budget_rounds(bound, m, params.eps, params.nu),
                v_failures: rep.rounds.iter().filter(|r| r.v_failure).count(),
                disagreements: 0,
                attack_found: None,
                failure: None,
            };
            (row, Some(rep))
        }
        Err(e) => (TrialRow::failed(t, "vr", &e), None),
    });
    let (rows, sessions) = out.into_iter().unzip();
    Ok(VrRun { rows, sessions })
}

pub fn run_fr(exp: &Experiment, trials: usize, seed: u64, exec: Execution) -> Result<Vec<TrialRow>> {
    let code = exp.fixed.as_ref().ok_or_else(|| Error::Scenario("no fixed_rate section".into()))?;
    let dec = FixedDecoder::new(code, &exp.scenario.p, &exp.scenario.h)?;
    let c_bits = (code.c_count as f64).log2();
    let n = code.n as f64;
    Ok(map_indexed(exec, trials, |t| match run_fixed_trial(&dec, &exp.scenario, seed, t) {
        Ok(out) => TrialRow {
            trial: t,
            mode: "fr",
            honest_error: out.honest_error,
            error_rounds: usize::from(out.honest_error),
            sum_rate: out.bits / n - exp.scenario.m() as f64 * c_bits / n,
            overhead_rate: exp.scenario.m() as f64 * c_bits / n,
            final_v: Vec::new(),
            over_budget_rounds: 0,
            v_failures: 0,
            disagreements: out.disagreements,
            attack_found: out.attack_found,
            failure: None,
        },
        Err(e) => TrialRow::failed(t, "fr", &e),
    }))
}

pub fn csv_string(rows: &[TrialRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}

pub fn write_csv(rows: &[TrialRow], path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(rows))?;
    Ok(())
}

/// One JSON object per transcript record, tagged with its trial.
pub fn write_transcripts(sessions: &[Option<SessionReport>], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (t, rep) in sessions.iter().enumerate() {
        let Some(rep) = rep else { continue };
        for rec in &rep.transcript {
            let line = serde_json::json!({ "trial": t, "record": rec });
            writeln!(f, "{line}")?;
        }
    }
    f.flush()?;
    Ok(())
}

/// Wilson score interval at z = 1.96.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.96f64;
    let nf = n as f64;
    let ph = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (ph + z * z / (2.0 * nf)) / denom;
    let half = z * (ph * (1.0 - ph) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mode: String,
    pub trials: usize,
    pub honest_errors: usize,
    pub error_rate: f64,
    pub error_ci: (f64, f64),
    pub mean_sum_rate: f64,
    pub mean_overhead_rate: f64,
    pub rate_bound: f64,
    pub gap: f64,
    pub max_over_budget_rounds: usize,
    /// Fraction of trials whose final `V` kept at least two sets.
    pub v_ge2_fraction: f64,
    pub attacks_found: usize,
    pub failures: usize,
}

impl Summary {
    pub fn from_rows(mode: &str, rows: &[TrialRow], rate_bound: f64) -> Self {
        let n = rows.len();
        let errors = rows.iter().filter(|r| r.honest_error).count();
        let mean = |f: &dyn Fn(&TrialRow) -> f64| if n == 0 { 0.0 } else { rows.iter().map(f).sum::<f64>() / n as f64 };
        let mean_sum_rate = mean(&|r| r.sum_rate);
        Summary {
            mode: mode.into(),
            trials: n,
            honest_errors: errors,
            error_rate: if n == 0 { 0.0 } else { errors as f64 / n as f64 },
            error_ci: wilson_interval(errors, n),
            mean_sum_rate,
            mean_overhead_rate: mean(&|r| r.overhead_rate),
            rate_bound,
            gap: mean_sum_rate - rate_bound,
            max_over_budget_rounds: rows.iter().map(|r| r.over_budget_rounds).max().unwrap_or(0),
            v_ge2_fraction: mean(&|r| f64::from(u8::from(r.final_v.len() >= 2))),
            attacks_found: rows.iter().filter(|r| r.attack_found == Some(true)).count(),
            failures: rows.iter().filter(|r| r.failure.is_some()).count(),
        }
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode              {}", self.mode)?;
        writeln!(f, "trials            {}", self.trials)?;
        writeln!(
            f,
            "honest errors     {} ({:.4}, 95% CI [{:.4}, {:.4}])",
            self.honest_errors, self.error_rate, self.error_ci.0, self.error_ci.1
        )?;
        writeln!(f, "mean sum rate     {:.4} bits/symbol (+{:.4} subcodebook overhead)", self.mean_sum_rate, self.mean_overhead_rate)?;
        writeln!(f, "R*                {:.4}", self.rate_bound)?;
        writeln!(f, "gap               {:+.4}", self.gap)?;
        if self.mode == "vr" {
            writeln!(f, "over-budget max   {}", self.max_over_budget_rounds)?;
            writeln!(f, "final |V| >= 2    {:.3}", self.v_ge2_fraction)?;
        } else {
            writeln!(f, "attacks found     {}", self.attacks_found)?;
        }
        write!(f, "failed trials     {}", self.failures)
    }
}

/// Human-readable region report.
pub fn region_text(exp: &Experiment) -> Result<String> {
    let s = &exp.scenario;
    let p = &s.p;
    let m = p.m();
    let mut out = String::new();
    let full = SubsetView::full(m);
    writeln!(out, "H(X_M)            {:.6}", p.entropy(&full)).ok();
    if s.info.is_perfect() {
        let rep = r_star_perfect_with(p, &s.h, Execution::Sequential)?;
        writeln!(out, "R*                {:.6}", rep.r_star).ok();
        let v: Vec<String> = rep.maximizer_v.iter().map(ToString::to_string).collect();
        writeln!(out, "maximizer V       {}", v.join(" ")).ok();
        for pair in &rep.per_pair {
            writeln!(out, "  R*({})  {:.6}", pair.honest, pair.value).ok();
        }
        if let Some(t) = s.h.threshold_t() {
            match t {
                0 => {
                    writeln!(out, "closed form       H(X_M) = {:.6}", p.entropy(&full)).ok();
                }
                1 => {
                    writeln!(out, "closed form       H(X_M) + max conditional MI = {:.6}", closed_form_t(p, 1)?).ok();
                    for i in 0..m {
                        for j in i + 1..m {
                            let a = SubsetView::singleton(i);
                            let b = SubsetView::singleton(j);
                            let rest = full.difference(&a.union(&b));
                            let cmi = p.conditional_mutual_information(&a, &b, &rest)?;
                            writeln!(out, "  I(X{};X{}|rest)   {:.6}", i + 1, j + 1, cmi).ok();
                        }
                    }
                }
                t if t + 1 == m => {
                    let sum: f64 = (0..m).map(|i| p.entropy(&SubsetView::singleton(i))).sum();
                    writeln!(out, "closed form       sum H(X_i) = {sum:.6}").ok();
                }
                t => {
                    if let Ok(v) = closed_form_t(p, t) {
                        writeln!(out, "closed form       {v:.6}").ok();
                    }
                }
            }
        }
    } else {
        let opts = GeneralOptions { seed: exp.file.seed, ..Default::default() };
        let rep = r_star_general(p, &s.h, &s.info, &s.h_true, s.true_channel(), opts)?;
        writeln!(out, "R*(H_true, r)     {:.6} (certification residual {:.2e})", rep.value, rep.residual).ok();
        let v: Vec<String> = rep.maximizer_v.iter().map(ToString::to_string).collect();
        writeln!(out, "maximizer V       {}", v.join(" ")).ok();
    }
    writeln!(out, "fixed-rate facets (randomized: every S in H; deterministic adds the known intersections)").ok();
    let mut facets: Vec<(SubsetView, &str)> = s.h.candidates().iter().map(|c| (c.clone(), "all")).collect();
    for set in known_intersections(p, &s.h, &s.info) {
        if !facets.iter().any(|(f, _)| *f == set) {
            facets.push((set, "det"));
        }
    }
    for (set, tag) in facets {
        let mask = set.mask();
        let mut sub = mask;
        while sub != 0 {
            let part = SubsetView::from_mask(sub);
            let rest = SubsetView::from_mask(mask & !sub);
            let need = p.conditional_entropy(&part, &rest)?;
            let names: Vec<String> = part.indices().iter().map(|i| format!("R{}", i + 1)).collect();
            writeln!(out, "  [{tag}] {} >= {:.6}   (within {set})", names.join(" + "), need).ok();
            sub = (sub - 1) & mask;
        }
    }
    Ok(out)
}
