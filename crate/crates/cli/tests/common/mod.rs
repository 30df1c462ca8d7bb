#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tski::simulate::{simulate, DgpModel, DgpSpec, SimDataset};
use tski::RngStream;

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_tski"))
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).env_remove("TSKI_THREADS").output().expect("binary runs")
}

pub fn model1_data(n: usize, seed: u64) -> SimDataset {
    simulate(&DgpSpec::new(DgpModel::Arx, 0.7, n), &mut RngStream::new(seed, 0)).expect("simulation")
}

/// Response column `y` followed by `x1..xp`.
pub fn write_dataset(path: &Path, data: &SimDataset) {
    let p = data.x.cols();
    let mut s = String::from("y");
    for j in 1..=p {
        s.push_str(&format!(",x{j}"));
    }
    s.push('\n');
    for i in 0..data.x.rows() {
        s.push_str(&format!("{:.16e}", data.y[i]));
        for v in data.x.row(i) {
            s.push_str(&format!(",{v:.16e}"));
        }
        s.push('\n');
    }
    std::fs::write(path, s).expect("write dataset");
}

pub fn write_ar1_sigma(path: &Path, p: usize, rho: f64) {
    let mut s = String::new();
    for i in 0..p {
        let row: Vec<String> = (0..p).map(|j| format!("{:?}", rho.powi((i as i32 - j as i32).abs()))).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    std::fs::write(path, s).expect("write sigma");
}
