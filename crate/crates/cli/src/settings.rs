//! Effective run configuration: TOML file values overridden by flags, then
//! range-checked before any work starts.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use catkit::catfilter::{self, FilterParams};
use catkit::concept::DEFAULT_TOP_K;
use catkit::gradcheck::{FD_STEP, REL_TOL};
use catkit::hnnce::{HnConfig, MIN_TAU};
use catkit::toy::SyntheticPairSpec;
use serde::{Deserialize, Serialize};

use crate::args::{CommonArgs, FilterArgs, GradcheckArgs, ProbeArgs, PseudolabelArgs, TrainToyArgs};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    #[serde(default)]
    filter: FilterSettings,
    #[serde(default)]
    pseudolabel: PseudolabelSettings,
    #[serde(default)]
    train_toy: TrainToySettings,
    #[serde(default)]
    gradcheck: GradcheckSettings,
    #[serde(default)]
    probe: ProbeSettings,
}

#[derive(Debug, Clone, Serialize)]
pub struct Common {
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn common(&self, args: &CommonArgs) -> Common {
        Common {
            seed: args.seed.or(self.seed).unwrap_or(0),
            out: args.out.clone().or_else(|| self.out.clone()).unwrap_or_else(|| PathBuf::from(".")),
        }
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    let p = path.as_deref().with_context(|| format!("missing required --{flag}"))?;
    ensure!(p.is_file(), "--{flag} {} is not a readable file", p.display());
    Ok(p)
}

fn check_optional_file(path: &Option<PathBuf>, flag: &str) -> anyhow::Result<()> {
    if path.is_some() {
        require(path, flag)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSettings {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub stats_out: Option<PathBuf>,
    pub filters: String,
    pub min_complexity: usize,
    pub spot_conf: f64,
    pub spot_chars: usize,
    pub min_score: f64,
}

impl Default for FilterSettings {
    fn default() -> Self {
        let p = FilterParams::default();
        Self {
            input: None,
            output: None,
            stats_out: None,
            filters: "c,a,t".into(),
            min_complexity: p.min_complexity,
            spot_conf: p.spot_confidence,
            spot_chars: p.spot_chars,
            min_score: p.min_score,
        }
    }
}

impl FilterSettings {
    pub fn resolve(file: &FileConfig, a: FilterArgs) -> anyhow::Result<Self> {
        let mut s = file.filter.clone();
        set_opt(&mut s.input, a.input);
        set_opt(&mut s.output, a.output);
        set_opt(&mut s.stats_out, a.stats_out);
        set(&mut s.filters, a.filters);
        set(&mut s.min_complexity, a.min_complexity);
        set(&mut s.spot_conf, a.spot_conf);
        set(&mut s.spot_chars, a.spot_chars);
        set(&mut s.min_score, a.min_score);
        require(&s.input, "input")?;
        s.params().validate()?;
        catkit::catfilter::Pipeline::new(s.filters()?)?;
        Ok(s)
    }

    pub fn params(&self) -> FilterParams {
        FilterParams {
            min_complexity: self.min_complexity,
            spot_confidence: self.spot_conf,
            spot_chars: self.spot_chars,
            min_score: self.min_score,
        }
    }

    pub fn filters(&self) -> anyhow::Result<Vec<catfilter::Filter>> {
        Ok(catfilter::parse_filter_list(&self.filters, &self.params())?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PseudolabelSettings {
    pub predictions: Option<PathBuf>,
    pub obj_vocab: Option<PathBuf>,
    pub attr_vocab: Option<PathBuf>,
    pub k: usize,
    pub output: Option<PathBuf>,
}

impl Default for PseudolabelSettings {
    fn default() -> Self {
        Self {
            predictions: None,
            obj_vocab: None,
            attr_vocab: None,
            k: DEFAULT_TOP_K,
            output: None,
        }
    }
}

impl PseudolabelSettings {
    pub fn resolve(file: &FileConfig, a: PseudolabelArgs) -> anyhow::Result<Self> {
        let mut s = file.pseudolabel.clone();
        set_opt(&mut s.predictions, a.predictions);
        set_opt(&mut s.obj_vocab, a.obj_vocab);
        set_opt(&mut s.attr_vocab, a.attr_vocab);
        set(&mut s.k, a.k);
        set_opt(&mut s.output, a.output);
        ensure!(s.k >= 1, "k must be >= 1, got {}", s.k);
        require(&s.predictions, "predictions")?;
        require(&s.obj_vocab, "obj-vocab")?;
        require(&s.attr_vocab, "attr-vocab")?;
        Ok(s)
    }
}

fn check_hn(alpha: f64, beta: f64) -> anyhow::Result<()> {
    HnConfig::new(alpha, beta)?;
    Ok(())
}

fn check_tau(tau: f64) -> anyhow::Result<()> {
    ensure!(
        tau.is_finite() && tau >= MIN_TAU,
        "temperature {tau} must be finite and >= {MIN_TAU} (similarity scale <= 100)"
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainToySettings {
    pub steps: usize,
    pub lr: f64,
    pub alpha: f64,
    pub beta: f64,
    pub tau_init: f64,
    pub learn_temperature: bool,
    pub top_k: usize,
    pub data: SyntheticPairSpec,
}

impl Default for TrainToySettings {
    fn default() -> Self {
        let c = catkit::toy::ToyConfig::default();
        Self {
            steps: c.steps,
            lr: c.lr,
            alpha: c.alpha,
            beta: c.beta,
            tau_init: 1.0 / c.init_scale,
            learn_temperature: c.learn_temperature,
            top_k: c.top_k,
            data: c.spec,
        }
    }
}

impl TrainToySettings {
    pub fn resolve(file: &FileConfig, a: TrainToyArgs) -> anyhow::Result<Self> {
        let mut s = file.train_toy.clone();
        if let Some(preset) = a.preset.as_deref() {
            let cfg = match preset {
                "small-clean" => HnConfig::<f64>::small_clean(),
                "large-noisy" => HnConfig::<f64>::large_noisy(),
                other => bail!("unknown preset {other:?}; expected small-clean or large-noisy"),
            };
            s.alpha = cfg.alpha;
            s.beta = cfg.beta;
        }
        set(&mut s.steps, a.steps);
        set(&mut s.lr, a.lr);
        set(&mut s.alpha, a.alpha);
        set(&mut s.beta, a.beta);
        set(&mut s.tau_init, a.tau_init);
        if a.fixed_tau {
            s.learn_temperature = false;
        }
        set(&mut s.top_k, a.top_k);
        set(&mut s.data.n_train, a.n_train);
        set(&mut s.data.n_test, a.n_test);
        set(&mut s.data.d, a.dim);
        set(&mut s.data.noise, a.noise);
        set(&mut s.data.alignment, a.alignment);
        set(&mut s.data.duplicate_rate, a.duplicate_rate);
        check_hn(s.alpha, s.beta)?;
        check_tau(s.tau_init)?;
        s.config(0).validate()?;
        Ok(s)
    }

    pub fn config(&self, seed: u64) -> catkit::toy::ToyConfig {
        catkit::toy::ToyConfig {
            spec: self.data,
            steps: self.steps,
            lr: self.lr,
            alpha: self.alpha,
            beta: self.beta,
            init_scale: 1.0 / self.tau_init,
            learn_temperature: self.learn_temperature,
            top_k: self.top_k,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSettings {
    pub batch: Option<PathBuf>,
    pub n: usize,
    pub d: usize,
    pub tau: f64,
    pub mode: String,
    pub step: f64,
    pub tol: f64,
    pub report_out: Option<PathBuf>,
    pub inject_sign_flip: bool,
}

impl Default for GradcheckSettings {
    fn default() -> Self {
        let g = catkit::gradcheck::GridSpec::default();
        Self {
            batch: None,
            n: g.n,
            d: g.d,
            tau: g.tau,
            mode: "both".into(),
            step: FD_STEP,
            tol: REL_TOL,
            report_out: None,
            inject_sign_flip: false,
        }
    }
}

impl GradcheckSettings {
    pub fn resolve(file: &FileConfig, a: GradcheckArgs) -> anyhow::Result<Self> {
        let mut s = file.gradcheck.clone();
        set_opt(&mut s.batch, a.batch);
        set(&mut s.n, a.n);
        set(&mut s.d, a.d);
        set(&mut s.tau, a.tau);
        set(&mut s.mode, a.mode);
        set(&mut s.step, a.step);
        set(&mut s.tol, a.tol);
        set_opt(&mut s.report_out, a.report_out);
        s.inject_sign_flip |= a.inject_sign_flip;
        ensure!(s.n >= 2, "gradcheck batch needs n >= 2, got {}", s.n);
        ensure!(s.d >= 1, "gradcheck needs d >= 1");
        check_tau(s.tau)?;
        ensure!(s.step > 0.0 && s.step.is_finite(), "finite-difference step must be > 0");
        ensure!(s.tol > 0.0, "tolerance must be > 0");
        s.modes()?;
        check_optional_file(&s.batch, "batch")?;
        Ok(s)
    }

    pub fn modes(&self) -> anyhow::Result<Vec<catkit::hnnce::WeightGradient>> {
        use catkit::hnnce::WeightGradient::{Detached, Full};
        Ok(match self.mode.as_str() {
            "detached" => vec![Detached],
            "full" => vec![Full],
            "both" => vec![Detached, Full],
            other => bail!("unknown gradient mode {other:?}; expected detached, full or both"),
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSettings {
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    pub delta: Option<f64>,
    pub delta_b: Option<f64>,
    pub lr: Option<f64>,
    pub iters: Option<usize>,
    pub batch_size: Option<usize>,
    pub cosine: bool,
    pub trajectory_out: Option<PathBuf>,
    pub delta_grid: Vec<f64>,
    pub delta_b_grid: Vec<f64>,
    pub k_shot: Vec<usize>,
    pub eval_features: Option<PathBuf>,
    pub eval_labels: Option<PathBuf>,
}

pub const DEFAULT_PROBE_ITERS: usize = 500;

impl ProbeSettings {
    pub fn resolve(file: &FileConfig, a: ProbeArgs) -> anyhow::Result<Self> {
        let mut s = file.probe.clone();
        set_opt(&mut s.features, a.features);
        set_opt(&mut s.labels, a.labels);
        set_opt(&mut s.prompts, a.prompts);
        set_opt(&mut s.delta, a.delta);
        set_opt(&mut s.delta_b, a.delta_b);
        set_opt(&mut s.lr, a.lr);
        set_opt(&mut s.iters, a.iters);
        set_opt(&mut s.batch_size, a.batch_size);
        s.cosine |= a.cosine;
        set_opt(&mut s.trajectory_out, a.trajectory_out);
        set(&mut s.delta_grid, a.delta_grid);
        set(&mut s.delta_b_grid, a.delta_b_grid);
        set(&mut s.k_shot, a.k_shot);
        set_opt(&mut s.eval_features, a.eval_features);
        set_opt(&mut s.eval_labels, a.eval_labels);

        let delta = s.delta.context("missing required --delta")?;
        let delta_b = s.delta_b.context("missing required --delta-b")?;
        for (name, v) in std::iter::once(("delta", delta))
            .chain(std::iter::once(("delta-b", delta_b)))
            .chain(s.delta_grid.iter().map(|&v| ("delta-grid", v)))
            .chain(s.delta_b_grid.iter().map(|&v| ("delta-b-grid", v)))
        {
            ensure!(v >= 0.0 && !v.is_nan(), "--{name} value {v} must be >= 0");
        }
        if let Some(lr) = s.lr {
            ensure!(lr > 0.0 && lr.is_finite(), "--lr {lr} must be > 0");
        }
        ensure!(s.batch_size != Some(0), "--batch-size must be >= 1");
        ensure!(s.k_shot.iter().all(|&k| k >= 1), "--k-shot values must be >= 1");
        ensure!(
            s.eval_features.is_some() == s.eval_labels.is_some(),
            "--eval-features and --eval-labels go together"
        );
        require(&s.features, "features")?;
        require(&s.labels, "labels")?;
        require(&s.prompts, "prompts")?;
        check_optional_file(&s.eval_features, "eval-features")?;
        check_optional_file(&s.eval_labels, "eval-labels")?;
        Ok(s)
    }

    pub fn iters(&self) -> usize {
        self.iters.unwrap_or(DEFAULT_PROBE_ITERS)
    }
}
