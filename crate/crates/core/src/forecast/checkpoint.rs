//! Binary checkpoints.
//!
//! ```text
//! "BWPRED1" | version u8 | header length u32 LE | JSON header | f64 LE arrays
//! ```
//!
//! The header lists every array with its element offset, so parameters,
//! scaler bounds, the loss curve and optimizer moments round-trip bit for bit.

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::arima::ArimaModel;
use super::lstm::Lstm;
use super::mlp::Mlp;
use super::model::{Forecaster, ModelKind, TrainedModel};
use super::params::{layout, ParamSpec};
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::features::{schema_hash, Scaler};

pub const MAGIC: &[u8; 7] = b"BWPRED1";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: ModelKind,
    schema_hash: String,
    offset: usize,
    interval: f64,
    config: TrainConfig,
    /// mlp layer sizes
    #[serde(skip_serializing_if = "Option::is_none", default)]
    sizes: Option<Vec<usize>>,
    /// lstm `[input, hidden, dense, window]`
    #[serde(skip_serializing_if = "Option::is_none", default)]
    lstm: Option<[usize; 4]>,
    /// arima `[p, d, q]`
    #[serde(skip_serializing_if = "Option::is_none", default)]
    order: Option<[usize; 3]>,
    param_count: usize,
    adam_steps: Option<u64>,
    arrays: Vec<ParamSpec>,
}

pub fn save_checkpoint(model: &TrainedModel) -> Result<Vec<u8>> {
    let mut named: Vec<(String, Vec<f64>)> = Vec::new();
    let mut header = Header {
        kind: model.kind(),
        schema_hash: model.schema_hash.clone(),
        offset: model.offset,
        interval: model.interval,
        config: model.config.clone(),
        sizes: None,
        lstm: None,
        order: None,
        param_count: 0,
        adam_steps: model.adam.as_ref().map(|a| a.t),
        arrays: vec![],
    };
    let push_params = |named: &mut Vec<(String, Vec<f64>)>, layout: &[ParamSpec], params: &[f64]| {
        for s in layout {
            named.push((s.name.clone(), params[s.range()].to_vec()));
        }
    };
    match &model.forecaster {
        Forecaster::Mlp(m) => {
            header.sizes = Some(m.sizes.clone());
            header.param_count = m.params.len();
            push_params(&mut named, &m.layout, &m.params);
        }
        Forecaster::Lstm(m) => {
            header.lstm = Some([m.input, m.hidden, m.dense, m.window]);
            header.param_count = m.params.len();
            push_params(&mut named, &m.layout, &m.params);
        }
        Forecaster::Arima(m) => {
            header.order = Some([m.p, m.d, m.q]);
            header.param_count = m.param_count();
            named.push(("phi".into(), m.phi.clone()));
            named.push(("theta".into(), m.theta.clone()));
            named.push(("arima_stats".into(), vec![m.intercept, m.sigma2, m.aic, m.bic]));
        }
    }
    named.push(("scaler_min".into(), model.scaler.min.clone()));
    named.push(("scaler_max".into(), model.scaler.max.clone()));
    named.push(("loss_curve".into(), model.loss_curve.clone()));
    if let Some(a) = &model.adam {
        named.push(("adam_m".into(), a.m.clone()));
        named.push(("adam_v".into(), a.v.clone()));
    }
    let shapes: Vec<(&str, Vec<usize>)> = named
        .iter()
        .map(|(n, v)| {
            let shape = match &model.forecaster {
                Forecaster::Mlp(m) => m.layout.iter().find(|s| &s.name == n).map(|s| s.shape.clone()),
                Forecaster::Lstm(m) => m.layout.iter().find(|s| &s.name == n).map(|s| s.shape.clone()),
                Forecaster::Arima(_) => None,
            };
            (n.as_str(), shape.unwrap_or_else(|| vec![v.len()]))
        })
        .collect();
    header.arrays = layout(&shapes);

    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(12 + json.len() + 8 * header.arrays.iter().map(|a| a.len()).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, v) in &named {
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<TrainedModel> {
    if bytes.len() < 12 || &bytes[..7] != MAGIC {
        return Err(bad("bad magic (not a BWPRED1 checkpoint)"));
    }
    if bytes[7] != VERSION {
        return Err(bad(format!("unsupported version {} (expected {VERSION})", bytes[7])));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body)?;
    if header.schema_hash != schema_hash() {
        return Err(Error::SchemaMismatch {
            expected: schema_hash().to_string(),
            found: header.schema_hash,
        });
    }
    let data = &bytes[12 + hlen..];
    let total: usize = header.arrays.iter().map(|a| a.len()).sum();
    if data.len() != 8 * total {
        return Err(bad(format!(
            "payload is {} bytes, header declares {} values",
            data.len(),
            total
        )));
    }
    let values: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let get = |name: &str| -> Result<Vec<f64>> {
        header
            .arrays
            .iter()
            .find(|a| a.name == name)
            .and_then(|a| values.get(a.range()))
            .map(|v| v.to_vec())
            .ok_or_else(|| bad(format!("missing array '{name}'")))
    };
    let params_of = |layout: &[ParamSpec]| -> Result<Vec<f64>> {
        let mut p = Vec::new();
        for s in layout {
            let v = get(&s.name)?;
            if v.len() != s.len() {
                return Err(bad(format!("array '{}' has {} values, expected {}", s.name, v.len(), s.len())));
            }
            p.extend(v);
        }
        Ok(p)
    };
    let forecaster = match header.kind {
        ModelKind::Mlp => {
            let sizes = header.sizes.clone().ok_or_else(|| bad("mlp without sizes"))?;
            let mut m = Mlp::zeros(&sizes)?;
            m.params = params_of(&m.layout)?;
            Forecaster::Mlp(m)
        }
        ModelKind::Lstm => {
            let [i, h, d, w] = header.lstm.ok_or_else(|| bad("lstm without shape"))?;
            let mut m = Lstm::zeros(i, h, d, w)?;
            m.params = params_of(&m.layout)?;
            Forecaster::Lstm(m)
        }
        ModelKind::Arima => {
            let [p, d, q] = header.order.ok_or_else(|| bad("arima without order"))?;
            let phi = get("phi")?;
            let theta = get("theta")?;
            let stats = get("arima_stats")?;
            if phi.len() != p || theta.len() != q || stats.len() != 4 {
                return Err(bad("arima coefficient count does not match its order"));
            }
            Forecaster::Arima(ArimaModel {
                p,
                d,
                q,
                phi,
                theta,
                intercept: stats[0],
                sigma2: stats[1],
                aic: stats[2],
                bic: stats[3],
            })
        }
    };
    let adam = match header.adam_steps {
        Some(t) => Some(AdamState {
            config: header.config.adam,
            m: get("adam_m")?,
            v: get("adam_v")?,
            t,
        }),
        None => None,
    };
    Ok(TrainedModel {
        forecaster,
        scaler: Scaler {
            min: get("scaler_min")?,
            max: get("scaler_max")?,
        },
        offset: header.offset,
        interval: header.interval,
        schema_hash: header.schema_hash,
        config: header.config,
        loss_curve: get("loss_curve")?,
        adam,
    })
}

/// Number of scalar parameters declared in a checkpoint header.
pub fn declared_param_count(bytes: &[u8]) -> Result<usize> {
    if bytes.len() < 12 || &bytes[..7] != MAGIC {
        return Err(bad("bad magic (not a BWPRED1 checkpoint)"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body)?;
    Ok(header.param_count)
}
