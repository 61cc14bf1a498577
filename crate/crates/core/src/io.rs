//! On-disk formats: point-cloud CSV with a JSON manifest, and dataset
//! directories (`clean.csv`, `noisy.csv`, `meta.json`).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::datagen::{Dataset, Partition, Seeds};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;

pub fn coord_header(prefix: &str, dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("{prefix}{i}")).collect()
}

/// One point per row under the header `x0,...,x{D-1}`.
pub fn write_cloud_csv(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(coord_header("x", cloud.ambient_dim()))?;
    for p in cloud.iter() {
        w.write_record(p.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cloud_csv(path: &Path) -> Result<PointCloud> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let dim = header.len();
    let expected = coord_header("x", dim);
    if dim == 0 || header.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(Error::Format {
            path: path.to_owned(),
            reason: format!(
                "expected header x0..x{}, found {:?}",
                dim.saturating_sub(1),
                header
            ),
        });
    }
    let mut cloud = PointCloud::new(dim);
    let mut row = Vec::with_capacity(dim);
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        row.clear();
        for field in rec.iter() {
            row.push(field.trim().parse::<f64>().map_err(|e| Error::Format {
                path: path.to_owned(),
                reason: format!("row {}: {e}", line + 2),
            })?);
        }
        cloud.push(&row).map_err(|_| Error::Format {
            path: path.to_owned(),
            reason: format!("row {} has {} fields, expected {dim}", line + 2, row.len()),
        })?;
    }
    Ok(cloud)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudManifest {
    pub ambient_dim: usize,
    pub count: usize,
    pub path: String,
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_cloud(dir: &Path, stem: &str, cloud: &PointCloud) -> Result<CloudManifest> {
    let file = format!("{stem}.csv");
    write_cloud_csv(&dir.join(&file), cloud)?;
    let manifest = CloudManifest {
        ambient_dim: cloud.ambient_dim(),
        count: cloud.len(),
        path: file,
    };
    write_json(&dir.join(format!("{stem}.json")), &manifest)?;
    Ok(manifest)
}

/// Reads a cloud through its manifest, checking the declared shape.
pub fn read_cloud(manifest_path: &Path) -> Result<PointCloud> {
    let manifest: CloudManifest = read_json(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let cloud = read_cloud_csv(&base.join(&manifest.path))?;
    if cloud.ambient_dim() != manifest.ambient_dim || cloud.len() != manifest.count {
        return Err(Error::Format {
            path: manifest_path.to_owned(),
            reason: format!(
                "manifest declares {}x{}, csv has {}x{}",
                manifest.count,
                manifest.ambient_dim,
                cloud.len(),
                cloud.ambient_dim()
            ),
        });
    }
    Ok(cloud)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_owned(),
        reason: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub manifold: String,
    pub params: Value,
    pub sigma: f64,
    pub seeds: Seeds,
    pub partition: Partition,
}

pub fn save_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_cloud_csv(&dir.join("clean.csv"), &data.clean)?;
    write_cloud_csv(&dir.join("noisy.csv"), &data.noisy)?;
    let meta = DatasetMeta {
        manifold: data.manifold.clone(),
        params: data.params.clone(),
        sigma: data.sigma,
        seeds: data.seeds,
        partition: data.partition,
    };
    write_json(&dir.join("meta.json"), &meta)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let meta: DatasetMeta = read_json(&dir.join("meta.json"))?;
    let data = Dataset {
        manifold: meta.manifold,
        params: meta.params,
        clean: read_cloud_csv(&dir.join("clean.csv"))?,
        noisy: read_cloud_csv(&dir.join("noisy.csv"))?,
        sigma: meta.sigma,
        partition: meta.partition,
        seeds: meta.seeds,
    };
    data.validate().map_err(|e| Error::Format {
        path: dir.to_owned(),
        reason: e.to_string(),
    })?;
    Ok(data)
}

/// Creates `dir` and returns the path for a named file inside it.
pub fn out_path(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}
