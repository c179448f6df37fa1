//! Gnuplot scripts written next to the CSV outputs.

use std::path::Path;

use anyhow::{Context, Result};

use crate::commands::{SWEEP_FILE, TIMESERIES_FILE};

pub const TIMESERIES_SCRIPT: &str = "timeseries.gp";
pub const SWEEP_SCRIPT: &str = "sweep.gp";

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
}

pub fn write_timeseries_script(dir: &Path) -> Result<()> {
    let body = format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 't'\n\
         set ylabel 'order parameter'\n\
         set yrange [0:*]\n\
         plot '{TIMESERIES_FILE}' using 1:2 with lines, '' using 1:3 with lines\n\
         pause mouse close\n"
    );
    write(dir, TIMESERIES_SCRIPT, &body)
}

pub fn write_sweep_script(dir: &Path) -> Result<()> {
    let body = format!(
        "set datafile separator ','\n\
         set xlabel 'K'\n\
         set ylabel 'asymptotic graph order norm'\n\
         set yrange [0:*]\n\
         plot '{SWEEP_FILE}' using 1:6 every ::1 with points pt 7 title 'replicates'\n\
         pause mouse close\n"
    );
    write(dir, SWEEP_SCRIPT, &body)
}
