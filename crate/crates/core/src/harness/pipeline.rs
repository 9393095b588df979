//! Prune, project, train, test.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::config::ExperimentConfig;
use super::report::{emit_curves, emit_metrics};
use super::train::{evaluate, train, Trained};
use crate::data::{load_bin, load_emnist_pooled, save_bin, stratified_split, Dataset, FeatureScale, SplitSpec};
use crate::error::{Error, Result};
use crate::pca::PcaModel;
use crate::prune::{prune_by_mean_distance, prune_by_reconstruction_rmse, PruneMethod, PruneReport};

/// Components used to score reconstruction error when the configuration does
/// not request a PCA stage.
pub const DEFAULT_RMSE_COMPONENTS: usize = 78;

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub trained: Trained,
    pub pca: Option<PcaModel>,
    /// Pruning stages in the order they ran; indices refer to that stage's
    /// input.
    pub prune_reports: Vec<PruneReport>,
    /// Training set after every stage, as seen by the network.
    pub train_set: Dataset,
}

impl Splits {
    /// Pools the official EMNIST files in `dir`, scales pixels to [0, 1]
    /// and draws a stratified split.
    pub fn from_emnist_dir(dir: impl AsRef<Path>, spec: &SplitSpec) -> Result<Splits> {
        let full = load_emnist_pooled(dir)?.normalize()?;
        let (train, valid, test) = stratified_split(&full, spec)?;
        Ok(Splits { train, valid, test })
    }

    /// Reads `train.emds`, `valid.emds` and `test.emds` from `dir`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Splits> {
        let dir = dir.as_ref();
        Ok(Splits {
            train: load_bin(dir.join("train.emds"))?,
            valid: load_bin(dir.join("valid.emds"))?,
            test: load_bin(dir.join("test.emds"))?,
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        save_bin(&self.train, dir.join("train.emds"))?;
        save_bin(&self.valid, dir.join("valid.emds"))?;
        save_bin(&self.test, dir.join("test.emds"))
    }
}

/// Applies the configured pruning to `train`, returning the reduced set.
pub fn prune_stage(config: &ExperimentConfig, train: &Dataset) -> Result<(Dataset, Vec<PruneReport>)> {
    let Some(p) = config.prune else {
        return Ok((train.clone(), Vec::new()));
    };
    let mut current = train.clone();
    let mut reports = Vec::new();
    if p.chain_after_mean {
        let r = prune_by_mean_distance(&current.features, &current.labels, p.chain_keep)?;
        current = current.subset(&r.kept, current.name.clone());
        reports.push(r);
    }
    let r = match p.method {
        PruneMethod::MeanDistance => prune_by_mean_distance(&current.features, &current.labels, p.keep_k)?,
        PruneMethod::ReconstructionRmse => {
            let k = config.pca_components.unwrap_or(DEFAULT_RMSE_COMPONENTS);
            let model = PcaModel::fit(&current.features, k.min(current.dim()))?;
            prune_by_reconstruction_rmse(&current.features, &current.labels, &model, p.keep_k)?
        }
    };
    current = current.subset(&r.kept, current.name.clone());
    reports.push(r);
    Ok((current, reports))
}

pub fn project(model: &PcaModel, data: &Dataset) -> Result<Dataset> {
    Dataset::new(
        model.transform(&data.features)?,
        data.labels.clone(),
        data.name.clone(),
        FeatureScale::Projected,
    )
}

/// Runs every configured stage, evaluates the test split once, and, when
/// `out_dir` is given, writes the model, curves, metrics, configuration and
/// stage artifacts there.
pub fn pipeline(config: &ExperimentConfig, splits: &Splits, out_dir: Option<&Path>) -> Result<PipelineOutput> {
    config.validate()?;
    let (mut train_set, prune_reports) = prune_stage(config, &splits.train)?;
    let mut valid = splits.valid.clone();
    let mut test = splits.test.clone();
    let mut run_config = config.clone();
    let pca = match config.pca_components {
        Some(k) => {
            if k > train_set.dim() {
                return Err(Error::param(format!(
                    "{k} components requested for {}-dimensional data",
                    train_set.dim()
                )));
            }
            let model = PcaModel::fit(&train_set.features, k)?;
            train_set = project(&model, &train_set)?;
            valid = project(&model, &valid)?;
            test = project(&model, &test)?;
            run_config.architecture[0] = k;
            Some(model)
        }
        None => None,
    };
    let mut trained = train(&run_config, &train_set, &valid)?;
    let (test_loss, test_acc) = evaluate(&trained.network, &test)?;
    trained.result.test_loss = Some(test_loss);
    trained.result.test_acc = Some(test_acc);

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let model_path = dir.join("model.mlpm");
        trained.network.save(&model_path)?;
        trained.result.model_path = Some(model_path);
        fs::write(dir.join("config.txt"), run_config.to_text())?;
        if !trained.result.history.is_empty() {
            emit_curves(&trained.result.history, dir.join("curves.csv"))?;
            emit_metrics(&trained.result.history, dir.join("metrics.csv"))?;
        }
        if let Some(model) = &pca {
            model.save(dir.join("pca.pcam"))?;
        }
        let n = prune_reports.len();
        for (i, r) in prune_reports.iter().enumerate() {
            let name = if i + 1 == n { "prune.csv".to_string() } else { format!("prune-stage{}.csv", i + 1) };
            let mut w = BufWriter::new(File::create(dir.join(name))?);
            r.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    Ok(PipelineOutput {
        trained,
        pca,
        prune_reports,
        train_set,
    })
}
