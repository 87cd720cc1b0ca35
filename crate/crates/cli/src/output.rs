//! Files written by every command: CSV tables, inspection PNGs and the run
//! manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, Rgb};
use nalgebra::DVector;
use serde::Serialize;

use crate::failure::Failure;

pub const PLAN_SIZE: u32 = 512;

/// Output directory plus the list of files written so far.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(root)
            .map_err(|e| Failure::config(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    /// Open `name` for writing and record it.
    pub fn file(&mut self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.root.join(name);
        let f = File::create(&path).map_err(|e| {
            Failure::from(anyhow::Error::from(e).context(format!("cannot write {}", path.display())))
        })?;
        self.written.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    pub fn table(&mut self, name: &str, header: &[&str], rows: Vec<Vec<f64>>) -> Result<(), Failure> {
        let mut w = self.file(name)?;
        penumbra::io::write_table(&mut w, header, rows)?;
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut w = self.file(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(anyhow::Error::from)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn png16_gray(&mut self, name: &str, img: ImageBuffer<Luma<u16>, Vec<u16>>) -> Result<(), Failure> {
        let path = self.root.join(name);
        img.save(&path).map_err(anyhow::Error::from)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn png16_rgb(&mut self, name: &str, img: ImageBuffer<Rgb<u16>, Vec<u16>>) -> Result<(), Failure> {
        let path = self.root.join(name);
        img.save(&path).map_err(anyhow::Error::from)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn png8_rgb(&mut self, name: &str, img: ImageBuffer<Rgb<u8>, Vec<u8>>) -> Result<(), Failure> {
        let path = self.root.join(name);
        img.save(&path).map_err(anyhow::Error::from)?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Write `manifest.json`; call last so it lists every other output.
    pub fn manifest<C: Serialize>(&mut self, run: RunInfo, config: &C) -> Result<(), Failure> {
        let manifest = Manifest {
            tool: "penumbra",
            version: env!("CARGO_PKG_VERSION"),
            command: run.command,
            config_path: run.config_path,
            seed: run.seed,
            algorithm: run.algorithm,
            threads: run.threads,
            parallel: cfg!(feature = "parallel"),
            status: run.status,
            config: serde_json::to_value(config).map_err(anyhow::Error::from)?,
            outputs: self.written.clone(),
        };
        self.json("manifest.json", &manifest)
    }
}

#[derive(Clone)]
pub struct RunInfo {
    pub command: &'static str,
    pub config_path: String,
    pub seed: Option<u64>,
    pub algorithm: Option<String>,
    pub threads: Option<usize>,
    pub status: String,
}

/// Everything needed to replay a run: the resolved configuration with all
/// defaults filled in, the effective seed and the produced files.
#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_path: String,
    seed: Option<u64>,
    algorithm: Option<String>,
    threads: Option<usize>,
    parallel: bool,
    status: String,
    config: serde_json::Value,
    outputs: Vec<String>,
}

fn range_of<'a>(vals: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn to_u16(v: f64, lo: f64, hi: f64) -> u16 {
    if hi > lo {
        ((v - lo) / (hi - lo) * 65535.0).round().clamp(0.0, 65535.0) as u16
    } else {
        0
    }
}

/// Min–max scaled 16-bit image, row 0 farthest from the wall.
pub fn measurement_gray(nx: usize, ny: usize, v: &DVector<f64>) -> ImageBuffer<Luma<u16>, Vec<u16>> {
    let (lo, hi) = range_of(v.iter());
    ImageBuffer::from_fn(nx as u32, ny as u32, |x, y| {
        let m = (ny - 1 - y as usize) * nx + x as usize;
        Luma([to_u16(v[m], lo, hi)])
    })
}

/// Three channels sharing one scale so colors stay comparable.
pub fn measurement_rgb(nx: usize, ny: usize, ch: &[DVector<f64>]) -> ImageBuffer<Rgb<u16>, Vec<u16>> {
    let (lo, hi) = range_of(ch.iter().flat_map(|c| c.iter()));
    ImageBuffer::from_fn(nx as u32, ny as u32, |x, y| {
        let m = (ny - 1 - y as usize) * nx + x as usize;
        Rgb([to_u16(ch[0][m], lo, hi), to_u16(ch[1][m], lo, hi), to_u16(ch[2][m], lo, hi)])
    })
}

/// What to paint at a hidden-plane point `(ρ, α)`, as per-channel values.
pub trait PlanView {
    fn extent(&self) -> f64;
    fn sample(&self, rho: f64, alpha: f64) -> Option<[f64; 3]>;
}

/// Nearest-neighbor polar raster of the hidden quadrant. The corner is the
/// top-right pixel, the wall runs along the top edge and angle grows
/// clockwise from it, matching a plan view from above.
pub fn plan_view(view: &dyn PlanView) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
    let n = PLAN_SIZE;
    let scale = view.extent() / n as f64;
    let mut peak: f64 = 0.0;
    let mut cells = vec![None; (n * n) as usize];
    for y in 0..n {
        for x in 0..n {
            let hx = (n - x) as f64 - 0.5;
            let hy = y as f64 + 0.5;
            let rho = hx.hypot(hy) * scale;
            let alpha = hy.atan2(hx);
            let v = view.sample(rho, alpha);
            if let Some(c) = v {
                peak = c.iter().fold(peak, |a, &b| a.max(b));
            }
            cells[(y * n + x) as usize] = v;
        }
    }
    ImageBuffer::from_fn(n, n, |x, y| match cells[(y * n + x) as usize] {
        Some(c) if peak > 0.0 => Rgb(c.map(|v| (v / peak * 255.0).round().clamp(0.0, 255.0) as u8)),
        _ => Rgb([0, 0, 0]),
    })
}
