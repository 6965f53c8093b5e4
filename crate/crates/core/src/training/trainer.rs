//! Mini-batch training loops: plain fitting with best-validation
//! checkpointing, per-OD spatial-layer pretraining, the two-step procedure
//! and the timestep sweep.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::AssembledSample;
use crate::ingest::N_WX;
use crate::model::{ModelDims, ModelInput, ModelOptions, Preprocessing, SwlBank, SwrnnModel};
use crate::nn::{adam_step, AdamConfig, BatchNormConfig};
use crate::training::config::TrainConfig;

/// How a model is trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMethod {
    /// Per-OD spatial-layer pretraining, then shared training with the
    /// spatial layers frozen.
    TwoStep,
    /// Everything trained jointly from the start.
    SingleStep,
    /// No spatial weighted layers at all.
    Ablation,
}

impl TrainMethod {
    pub fn name(self) -> &'static str {
        match self {
            TrainMethod::TwoStep => "swrnn_two_step",
            TrainMethod::SingleStep => "swrnn_single_step",
            TrainMethod::Ablation => "rnn_ablation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_rmse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub patience: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: SwrnnModel,
    pub history: Vec<EpochRecord>,
    /// 1-based; 0 when no epoch ran.
    pub best_epoch: usize,
}

/// Mean squared error of evaluation-mode predictions.
pub fn evaluate_mse(model: &SwrnnModel, data: &[&ModelInput]) -> Result<f64> {
    if data.is_empty() {
        return Ok(f64::NAN);
    }
    let preds: Vec<f64> = data.par_iter().map(|x| model.forward(x)).collect::<Result<_>>()?;
    Ok(preds.iter().zip(data).map(|(p, x)| (p - x.target).powi(2)).sum::<f64>() / data.len() as f64)
}

/// Trains every unfrozen parameter with Adam on shuffled mini-batches and
/// returns the parameters of the best validation epoch. Stops after
/// `patience` epochs without improvement.
pub fn fit(mut model: SwrnnModel, train: &[&ModelInput], val: &[&ModelInput], s: &FitSettings) -> Result<FitOutcome> {
    if train.is_empty() {
        return Err(Error::InvalidConfig("empty training set".into()));
    }
    if val.is_empty() {
        return Err(Error::InvalidConfig("empty validation set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(s.epochs);
    let mut best: Option<(f64, usize, SwrnnModel)> = None;
    let mut since_best = 0;
    for epoch in 1..=s.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(s.batch_size.max(1)) {
            let batch: Vec<&ModelInput> = chunk.iter().map(|&i| train[i]).collect();
            let out = match model.train_batch(&batch, &mut rng) {
                Ok(o) => o,
                Err(Error::NonFiniteActivation(_)) => {
                    return Err(Error::DivergenceDetected { epoch, loss: f64::NAN });
                }
                Err(e) => return Err(e),
            };
            total += out.loss * batch.len() as f64;
            adam_step(&mut model.store, s.adam);
        }
        let train_loss = total / train.len() as f64;
        let val_loss = evaluate_mse(&model, val)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::DivergenceDetected {
                epoch,
                loss: if train_loss.is_finite() { val_loss } else { train_loss },
            });
        }
        log::debug!("epoch {epoch}: train {train_loss:.4} val {val_loss:.4}");
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_rmse: val_loss.sqrt(),
        });
        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= s.patience {
                log::info!("early stop after epoch {epoch}");
                break;
            }
        }
    }
    let (best_model, best_epoch) = match best {
        Some((_, e, m)) => (m, e),
        None => (model, 0),
    };
    let mut best_model = best_model;
    best_model.store.zero_grad();
    Ok(FitOutcome {
        model: best_model,
        history,
        best_epoch,
    })
}

pub fn model_dims(prep: &Preprocessing) -> ModelDims {
    ModelDims::standard(prep.n_t, prep.n_od, prep.n_ap, 2 * N_WX, prep.flight_dim())
}

pub fn model_options(cfg: &TrainConfig, use_swl: bool) -> ModelOptions {
    ModelOptions {
        use_swl,
        leaky_slope: cfg.leaky_slope,
        dropout_rate: cfg.dropout_rate,
        batch_norm: BatchNormConfig::default(),
    }
}

fn settings(cfg: &TrainConfig, epochs: usize, seed: u64) -> FitSettings {
    FitSettings {
        epochs,
        batch_size: cfg.batch_size,
        adam: cfg.adam(),
        patience: cfg.patience,
        seed,
    }
}

/// Per-OD outcome of spatial-layer pretraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdPretrain {
    pub od_index: usize,
    pub train_samples: usize,
    /// `None` when the OD had too few samples and kept the identity layer.
    pub best_val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainResult {
    pub bank: SwlBank,
    pub ods: Vec<OdPretrain>,
}

/// Step one: for every OD pair with enough samples, train a throwaway full
/// model on that OD's samples alone and keep only its spatial layer.
pub fn pretrain_swl(
    train: &[&ModelInput],
    val: &[&ModelInput],
    dims: ModelDims,
    options: ModelOptions,
    target: crate::model::TargetScaler,
    cfg: &TrainConfig,
) -> Result<PretrainResult> {
    let options = ModelOptions { use_swl: true, ..options };
    let jobs: Vec<(usize, Vec<&ModelInput>, Vec<&ModelInput>)> = (0..dims.n_od)
        .map(|l| {
            let tr: Vec<&ModelInput> = train.iter().copied().filter(|x| x.od_index == l).collect();
            let va: Vec<&ModelInput> = val.iter().copied().filter(|x| x.od_index == l).collect();
            (l, tr, va)
        })
        .collect();
    let results: Vec<(OdPretrain, Option<crate::model::SwlWeights>)> = jobs
        .into_par_iter()
        .map(|(l, tr, va)| {
            if tr.len() < cfg.min_samples_per_od.max(1) {
                if tr.is_empty() {
                    log::warn!("OD {l} has no training samples; keeping identity spatial layer");
                }
                return Ok((
                    OdPretrain {
                        od_index: l,
                        train_samples: tr.len(),
                        best_val_loss: None,
                    },
                    None,
                ));
            }
            let seed = cfg.seed.wrapping_add(1 + l as u64);
            let mut model = SwrnnModel::new(dims, options, seed);
            model.target = target;
            // with no validation samples for this OD, select on training data
            let va = if va.is_empty() { tr.clone() } else { va };
            let out = fit(model, &tr, &va, &settings(cfg, cfg.step1_epochs, seed))?;
            let best = out.history.get(out.best_epoch.wrapping_sub(1)).map(|h| h.val_loss);
            Ok((
                OdPretrain {
                    od_index: l,
                    train_samples: tr.len(),
                    best_val_loss: best,
                },
                Some(out.model.swl_weights(l)),
            ))
        })
        .collect::<Result<_>>()?;
    let mut bank = SwlBank::identity(dims.n_od, dims.n_ap);
    let mut ods = Vec::with_capacity(results.len());
    for (rep, w) in results {
        if let Some(w) = w {
            bank.entries[rep.od_index] = w;
        }
        ods.push(rep);
    }
    Ok(PretrainResult { bank, ods })
}

/// A trained model with its training record.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub method: TrainMethod,
    pub model: SwrnnModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub pretrain: Option<Vec<OdPretrain>>,
}

/// Trains a model with `method` on encoded inputs.
pub fn train_model(
    method: TrainMethod,
    prep: &Preprocessing,
    train: &[&ModelInput],
    val: &[&ModelInput],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let dims = model_dims(prep);
    match method {
        TrainMethod::TwoStep => {
            let options = model_options(cfg, true);
            let pre = pretrain_swl(train, val, dims, options, prep.target, cfg)?;
            let mut model = SwrnnModel::new(dims, options, cfg.seed);
            model.target = prep.target;
            let mut bank = pre.bank;
            bank.frozen = vec![true; bank.len()];
            model.set_swl_bank(&bank)?;
            let out = fit(model, train, val, &settings(cfg, cfg.step2_epochs, cfg.seed))?;
            Ok(TrainReport {
                method,
                model: out.model,
                history: out.history,
                best_epoch: out.best_epoch,
                pretrain: Some(pre.ods),
            })
        }
        TrainMethod::SingleStep | TrainMethod::Ablation => {
            let options = model_options(cfg, method == TrainMethod::SingleStep);
            let mut model = SwrnnModel::new(dims, options, cfg.seed);
            model.target = prep.target;
            let out = fit(model, train, val, &settings(cfg, cfg.epochs, cfg.seed))?;
            Ok(TrainReport {
                method,
                model: out.model,
                history: out.history,
                best_epoch: out.best_epoch,
                pretrain: None,
            })
        }
    }
}

/// Writes the history as `epoch,train_loss,val_loss,val_rmse`.
pub fn history_csv(history: &[EpochRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for h in history {
        w.serialize(h)?;
    }
    if history.is_empty() {
        w.write_record(["epoch", "train_loss", "val_loss", "val_rmse"])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<history>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_t: usize,
    pub val_rmse: f64,
}

/// Retrains with each window length in `n_t_values` (shared seed) and
/// reports the validation RMSE of the selected model. Samples must carry
/// windows at least as long as the largest requested `n_t`.
pub fn timestep_sweep(
    train: &[&AssembledSample],
    val: &[&AssembledSample],
    index_hash: &str,
    cfg: &TrainConfig,
    n_t_values: &[usize],
    method: TrainMethod,
) -> Result<Vec<SweepRow>> {
    let mut values = n_t_values.to_vec();
    values.sort_unstable();
    values.dedup();
    let available = train
        .iter()
        .chain(val)
        .map(|s| s.delay_window.n_t())
        .min()
        .unwrap_or(0);
    let mut rows = Vec::with_capacity(values.len());
    for n_t in values {
        if n_t == 0 || n_t > available {
            return Err(Error::InvalidConfig(format!(
                "n_t={n_t} needs windows of {n_t} hours, samples carry {available}"
            )));
        }
        let cut = |s: &&AssembledSample| AssembledSample {
            delay_window: s.delay_window.truncated(n_t),
            ..(*s).clone()
        };
        let tr: Vec<AssembledSample> = train.iter().map(cut).collect();
        let va: Vec<AssembledSample> = val.iter().map(cut).collect();
        let tr_refs: Vec<&AssembledSample> = tr.iter().collect();
        let va_refs: Vec<&AssembledSample> = va.iter().collect();
        let prep = Preprocessing::fit(&tr_refs, index_hash)?;
        let tr_in = prep.encode_all(&tr_refs)?;
        let va_in = prep.encode_all(&va_refs)?;
        let cfg_n = TrainConfig { n_t, ..cfg.clone() };
        let report = train_model(
            method,
            &prep,
            &tr_in.iter().collect::<Vec<_>>(),
            &va_in.iter().collect::<Vec<_>>(),
            &cfg_n,
        )?;
        let mse = evaluate_mse(&report.model, &va_in.iter().collect::<Vec<_>>())?;
        log::info!("sweep n_t={n_t}: val rmse {:.4}", mse.sqrt());
        rows.push(SweepRow { n_t, val_rmse: mse.sqrt() });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TargetScaler;
    use rand::Rng;

    fn dims() -> ModelDims {
        ModelDims {
            n_t: 3,
            n_od: 3,
            n_ap: 2,
            weather_dim: 2,
            flight_dim: 2,
            lstm_layers: 2,
            hidden_od: 4,
            hidden_ap: 2,
            weather_hidden: 2,
            mlp_hidden: [8, 6, 4],
        }
    }

    fn data(n: usize, seed: u64) -> Vec<ModelInput> {
        let d = dims();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let mut v = |k: usize| (0..k).map(|_| rng.random_range(0.0..1.0)).collect::<Vec<f64>>();
                let od = v(d.n_t * d.n_od);
                let target = 3.0 * od[od.len() - 1] + od[od.len() - 2];
                ModelInput {
                    od_index: i % d.n_od,
                    od,
                    arr: v(d.n_t * d.n_ap),
                    dep: v(d.n_t * d.n_ap),
                    weather: v(d.weather_dim),
                    flight: v(d.flight_dim),
                    baseline: 0.0,
                    target,
                }
            })
            .collect()
    }

    fn quick(epochs: usize, lr: f64) -> FitSettings {
        FitSettings {
            epochs,
            batch_size: 8,
            adam: AdamConfig { lr, ..Default::default() },
            patience: 1000,
            seed: 3,
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let xs = data(20, 1);
        let refs: Vec<&ModelInput> = xs.iter().collect();
        let model = SwrnnModel::new(dims(), ModelOptions::default(), 2);
        let out = fit(model.clone(), &refs, &refs, &quick(3, 0.0)).unwrap();
        assert_eq!(out.model.store.value, model.store.value);
        assert_eq!(out.history.len(), 3);
    }

    #[test]
    fn best_epoch_is_returned() {
        let xs = data(40, 2);
        let refs: Vec<&ModelInput> = xs.iter().collect();
        let out = fit(SwrnnModel::new(dims(), ModelOptions::default(), 2), &refs[..30], &refs[30..], &quick(15, 0.01)).unwrap();
        let best = out.history[out.best_epoch - 1].val_loss;
        assert!(out.history.iter().all(|h| best <= h.val_loss));
        let again = evaluate_mse(&out.model, &refs[30..]).unwrap();
        assert_eq!(again, best);
    }

    #[test]
    fn training_is_reproducible_and_frozen_layers_stay_put() {
        let xs = data(24, 4);
        let refs: Vec<&ModelInput> = xs.iter().collect();
        let mut m = SwrnnModel::new(dims(), ModelOptions::default(), 5);
        m.freeze_swl(true);
        let bank = m.swl_bank();
        let a = fit(m.clone(), &refs, &refs, &quick(3, 0.01)).unwrap();
        let b = fit(m, &refs, &refs, &quick(3, 0.01)).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.model.swl_bank(), bank);
    }

    #[test]
    fn small_ods_keep_identity_layers() {
        let xs = data(12, 6);
        let refs: Vec<&ModelInput> = xs.iter().collect();
        let cfg = TrainConfig {
            min_samples_per_od: 5,
            step1_epochs: 2,
            batch_size: 4,
            ..Default::default()
        };
        // every OD has 4 samples, below the minimum
        let pre = pretrain_swl(&refs, &refs, dims(), ModelOptions::default(), TargetScaler::default(), &cfg).unwrap();
        assert_eq!(pre.bank, SwlBank::identity(3, 2));
        assert!(pre.ods.iter().all(|o| o.best_val_loss.is_none()));
        let cfg = TrainConfig { min_samples_per_od: 3, ..cfg };
        let pre = pretrain_swl(&refs, &refs, dims(), ModelOptions::default(), TargetScaler::default(), &cfg).unwrap();
        assert_ne!(pre.bank.entries[0], SwlBank::identity(3, 2).entries[0]);
    }

    #[test]
    fn history_has_header() {
        let csv = history_csv(&[EpochRecord {
            epoch: 1,
            train_loss: 2.0,
            val_loss: 3.0,
            val_rmse: 3f64.sqrt(),
        }])
        .unwrap();
        assert!(csv.starts_with("epoch,train_loss,val_loss,val_rmse\n1,2.0,3.0,"));
    }
}
