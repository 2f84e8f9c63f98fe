use std::path::PathBuf;

use clap::Args;
use degiorgi::orlicz::{luxemburg_norm, DiscreteMeasure, SampledFunction};
use serde::Serialize;

use crate::error::CliError;
use crate::output::{Report, Sink};
use crate::young_cmd::{parse_variant, Family};

#[derive(Args, Debug, Serialize)]
pub struct NormArgs {
    /// CSV with header `x,w,v` (1D) or `x,y,w,v` (2D), one row per cell.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    family: Family,
    /// `phi0`, `phi`, `psi`, `h` or `power:P`.
    #[arg(long, default_value = "phi0")]
    variant: String,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Serialize)]
struct NormResult {
    dim: usize,
    points: usize,
    total_mass: f64,
    norm: f64,
}

/// Points, weights and values from the CSV layout `x[,y],w,v`.
fn read_cells(path: &PathBuf) -> Result<(DiscreteMeasure, Vec<f64>), CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let dim = match header
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>()
        .as_slice()
    {
        ["x", "w", "v"] => 1,
        ["x", "y", "w", "v"] => 2,
        _ => {
            return Err(CliError::usage(format!(
                "expected header x[,y],w,v, found {}",
                header.join(",")
            )))
        }
    };
    let (mut points, mut weights, mut values) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let nums: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::usage(format!("row {}: non-numeric field", line + 2)))?;
        let p = if dim == 1 {
            [nums[0], 0.0]
        } else {
            [nums[0], nums[1]]
        };
        points.push(p);
        weights.push(nums[dim]);
        values.push(nums[dim + 1]);
    }
    Ok((DiscreteMeasure::new(dim, points, weights)?, values))
}

pub fn run(a: &NormArgs, sink: &Sink) -> Result<bool, CliError> {
    let f = parse_variant(&a.variant, &a.family)?;
    let (mu, values) = read_cells(&a.input)?;
    let u = SampledFunction::on(&mu, values)?;
    let norm = luxemburg_norm(&u, &mu, &f, a.tol)?;
    let r = NormResult {
        dim: mu.dim,
        points: mu.len(),
        total_mass: mu.total,
        norm,
    };
    Report {
        command: "norm",
        config: a,
        seed: None,
        passed: None,
        result: &r,
    }
    .emit(sink)
}
