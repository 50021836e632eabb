use std::path::{Path, PathBuf};

use serde::Deserialize;
use tws_core::checks::CheckConfig;
use tws_core::conditions::{DualBudget, FamilySpec, ForwardBudget, MaximalBudget, PartitionSearch};
use tws_core::corpus::{weight_pair, CorpusSpec};
use tws_core::decomp::WhitneyParams;
use tws_core::dyadic::Shift;
use tws_core::measure::MeasureFile;
use tws_core::operators::SearchBudget;
use tws_core::{StepAtomicMeasure, WeightPair};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum MeasureSource {
    Path(PathBuf),
    Inline(MeasureFile),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusPick {
    #[serde(default)]
    pub spec: CorpusSpec,
    #[serde(default)]
    pub index: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub sigma: Option<MeasureSource>,
    pub omega: Option<MeasureSource>,
    pub corpus: Option<CorpusPick>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub family: FamilySpec,
    pub partition: PartitionSearch,
    pub forward: ForwardBudget,
    pub dual: DualBudget,
    pub maximal: MaximalBudget,
    pub asym_c0: f64,
    /// Coarse cubes visited by the forward, dual and maximal searches.
    pub testing_cubes: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            family: FamilySpec::default(),
            partition: PartitionSearch::default(),
            forward: ForwardBudget::default(),
            dual: DualBudget::default(),
            maximal: MaximalBudget::default(),
            asym_c0: 4.0,
            testing_cubes: 64,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    pub suite: String,
    pub instances: usize,
    pub corpus: CorpusSpec,
    pub search: SearchBudget,
    pub whitney: WhitneyParams,
}

impl Default for CheckSection {
    fn default() -> Self {
        let c = CheckConfig::default();
        Self {
            suite: "all".into(),
            instances: c.instances,
            corpus: c.corpus,
            search: c.search,
            whitney: c.whitney,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub target: String,
    pub count: usize,
    pub top_k: usize,
    pub corpus: CorpusSpec,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            target: "strengthened_ratio".into(),
            count: 8,
            top_k: 3,
            corpus: CorpusSpec::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotSection {
    pub quantity: String,
    pub measure: String,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub log: bool,
    /// Interval length for the Poisson profile.
    pub length: f64,
    pub levels: Vec<i32>,
    pub mesh_scale: Option<i32>,
    pub search: SearchBudget,
}

impl Default for PlotSection {
    fn default() -> Self {
        Self {
            quantity: "t_natural".into(),
            measure: "sigma".into(),
            lo: 0.1,
            hi: 10.0,
            points: 64,
            log: true,
            length: 1.0,
            levels: vec![0, 1, 2],
            mesh_scale: None,
            search: SearchBudget::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WhitneySection {
    pub measure: String,
    pub level: i32,
    pub mesh_scale: Option<i32>,
    pub params: WhitneyParams,
    pub search: SearchBudget,
}

impl Default for WhitneySection {
    fn default() -> Self {
        Self {
            measure: "sigma".into(),
            level: 0,
            mesh_scale: None,
            params: WhitneyParams::default(),
            search: SearchBudget::with_density(16),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSource {
    pub resolution: i32,
    pub values: Vec<(i64, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CzSection {
    pub f: Option<StepSource>,
    pub gamma: Option<f64>,
    pub t: i32,
    pub shift: Shift,
    pub depth: u32,
}

impl Default for CzSection {
    fn default() -> Self {
        Self {
            f: None,
            gamma: None,
            t: 0,
            shift: Shift::Zero,
            depth: 8,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub report: Option<String>,
    pub csv: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub weights: Option<Weights>,
    pub p: f64,
    pub seed: u64,
    pub budgets: Budgets,
    pub check: CheckSection,
    pub search: SearchSection,
    pub plot: PlotSection,
    pub whitney: WhitneySection,
    pub cz: CzSection,
    pub outputs: Outputs,
    #[serde(skip)]
    pub base: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            weights: None,
            p: 2.0,
            seed: 0,
            budgets: Budgets::default(),
            check: CheckSection::default(),
            search: SearchSection::default(),
            plot: PlotSection::default(),
            whitney: WhitneySection::default(),
            cz: CzSection::default(),
            outputs: Outputs::default(),
            base: PathBuf::new(),
        }
    }
}

fn parse_error(path: &Path, e: serde_json::Error) -> CliError {
    CliError::Config(format!(
        "{}: line {}, column {}: {e}",
        path.display(),
        e.line(),
        e.column()
    ))
}

impl ExperimentConfig {
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| parse_error(path, e))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if let Some(s) = seed {
            cfg.seed = s;
        }
        // one seed drives every randomized choice
        let s = cfg.seed;
        cfg.budgets.family.seed = s;
        cfg.budgets.forward.seed = s;
        cfg.budgets.dual.seed = s;
        cfg.budgets.maximal.seed = s;
        if !(cfg.p > 1.0 && cfg.p.is_finite()) {
            return Err(CliError::Config(format!("p = {} must lie in (1, ∞)", cfg.p)));
        }
        Ok(cfg)
    }

    fn measure(&self, src: &MeasureSource) -> Result<StepAtomicMeasure, CliError> {
        match src {
            MeasureSource::Inline(file) => {
                StepAtomicMeasure::from_file(file).map_err(|e| CliError::Config(format!("inline measure: {e}")))
            }
            MeasureSource::Path(p) => {
                let path = self.base.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                StepAtomicMeasure::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
            }
        }
    }

    pub fn weight_pair(&self) -> Result<WeightPair, CliError> {
        let Some(w) = &self.weights else {
            return Err(CliError::Config("config has no `weights` section".into()));
        };
        if let Some(c) = &w.corpus {
            if w.sigma.is_some() || w.omega.is_some() {
                return Err(CliError::Config("give either `corpus` or `sigma`/`omega`, not both".into()));
            }
            return weight_pair(&c.spec, self.p, self.seed, c.index).map_err(|e| CliError::Config(e.to_string()));
        }
        let empty = || StepAtomicMeasure::atomic(Vec::new()).expect("empty measure");
        let sigma = w.sigma.as_ref().map(|s| self.measure(s)).transpose()?.unwrap_or_else(empty);
        let omega = w.omega.as_ref().map(|s| self.measure(s)).transpose()?.unwrap_or_else(empty);
        WeightPair::new(sigma, omega, self.p).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn check_config(&self) -> CheckConfig {
        CheckConfig {
            seed: self.seed,
            p: self.p,
            instances: self.check.instances,
            corpus: self.check.corpus.clone(),
            search: self.check.search,
            whitney: self.check.whitney.clone(),
        }
    }
}
