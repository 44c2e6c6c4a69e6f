//! Plain-text trace files.
//!
//! A trace starts with the full config as `# `-prefixed TOML lines, followed
//! by CSV sections each introduced by a `[name]` line:
//!
//! | section        | columns                                         |
//! |----------------|-------------------------------------------------|
//! | `[partition]`  | `satellite,part`                                |
//! | `[assignment]` | `air,satellite,hops`                            |
//! | `[cadence]`    | `t,kind` with kind `satellite` or `global`      |
//! | `[accuracy]`   | `round,t,accuracy,loss,params_sent`             |
//! | `[time]`       | `round,t_comm,t_comp,t_sync,t_total,n_ss`       |
//! | `[divergence]` | `round,delta,big_delta,rho,beta,bound,gap`      |
//! | `[comm]`       | `phase,step,src,dst,params` (first round only)  |
//!
//! Floats use `Display`, the shortest representation that round-trips, so a
//! fixed seed gives a byte-identical file.

use std::io::{self, Write};

use crate::fl::{Federation, TrainingTrace};
use crate::scalar::Scalar;

pub fn write_trace<T: Scalar, W: Write>(fed: &Federation<T>, trace: &TrainingTrace<T>, mut out: W) -> io::Result<()> {
    writeln!(out, "# seed = {}", fed.config.seed)?;
    for line in fed.config.to_toml().lines() {
        writeln!(out, "# {line}")?;
    }

    writeln!(out, "[partition]\nsatellite,part")?;
    if let Some(p) = &fed.partition {
        let mut rows: Vec<(usize, usize)> = p
            .parts
            .iter()
            .enumerate()
            .flat_map(|(i, part)| part.iter().map(move |&s| (s, i)))
            .collect();
        rows.sort_unstable();
        for (s, i) in rows {
            writeln!(out, "{s},{i}")?;
        }
    }

    writeln!(out, "[assignment]\nair,satellite,hops")?;
    for (a, (&s, &h)) in fed.assignment.target.iter().zip(&fed.assignment.hops).enumerate() {
        writeln!(out, "{a},{s},{h}")?;
    }

    writeln!(out, "[cadence]\nt,kind")?;
    let mut globals = trace.global_records.iter().peekable();
    for rec in &trace.satellite_records {
        writeln!(out, "{},satellite", rec.t)?;
        if let Some(g) = globals.next_if(|g| g.t == rec.t) {
            writeln!(out, "{},global", g.t)?;
        }
    }

    writeln!(out, "[accuracy]\nround,t,accuracy,loss,params_sent")?;
    for g in &trace.global_records {
        writeln!(out, "{},{},{},{},{}", g.round, g.t, g.accuracy, g.loss, g.params_sent)?;
    }

    writeln!(out, "[time]\nround,t_comm,t_comp,t_sync,t_total,n_ss")?;
    for g in &trace.global_records {
        let b = &g.time;
        writeln!(out, "{},{},{},{},{},{}", g.round, b.t_comm, b.t_comp, b.t_sync, b.t_total, b.n_ss)?;
    }

    writeln!(out, "[divergence]\nround,delta,big_delta,rho,beta,bound,gap")?;
    for d in &trace.diagnostics {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            d.round, d.delta, d.big_delta, d.rho, d.beta, d.bound, d.gap
        )?;
    }

    writeln!(out, "[comm]\nphase,step,src,dst,params")?;
    for r in &trace.comm.records {
        writeln!(out, "{},{},{},{},{}", r.phase, r.step, r.src, r.dst, r.params)?;
    }
    Ok(())
}

/// Rows of one CSV section of a trace file, header excluded.
pub fn section<'a>(text: &'a str, name: &str) -> Vec<&'a str> {
    let tag = format!("[{name}]");
    text.lines()
        .skip_while(|l| *l != tag)
        .skip(2)
        .take_while(|l| !l.starts_with('['))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::fl::run_hierarchical;

    const CFG: &str = r#"
seed = 1
[topology]
layout = "single_orbit"
n_sats = 4
n_air = 8
devices_per_air = 1
[data]
n_classes = 4
classes_per_device = 2
samples_per_device = 6
dim = 4
test_samples = 40
[training]
eta = 0.2
tau1 = 2
tau2 = 2
global_rounds = 3
diagnostics = true
[policy]
kind = "cnasa"
n_geo = 2
"#;

    fn render() -> String {
        let cfg = ExperimentConfig::from_toml(CFG).unwrap();
        let (fed, trace) = run_hierarchical::<f64>(&cfg).unwrap();
        let mut buf = Vec::new();
        write_trace(&fed, &trace, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn sections_and_cadence() {
        let text = render();
        assert!(text.starts_with("# seed = 1\n"));
        assert_eq!(section(&text, "partition").len(), 4);
        assert_eq!(section(&text, "assignment").len(), 8);
        assert_eq!(section(&text, "accuracy").len(), 3);
        assert_eq!(section(&text, "divergence").len(), 3);
        let cadence = section(&text, "cadence");
        assert_eq!(
            cadence,
            [
                "2,satellite",
                "4,satellite",
                "4,global",
                "6,satellite",
                "8,satellite",
                "8,global",
                "10,satellite",
                "12,satellite",
                "12,global"
            ]
        );
        assert!(section(&text, "comm")[0].starts_with("ring:scatter_reduce,0,"));
    }

    #[test]
    fn config_header_round_trips() {
        let text = render();
        let toml: String = text
            .lines()
            .skip(1)
            .map_while(|l| l.strip_prefix("# "))
            .map(|l| format!("{l}\n"))
            .collect();
        let back = ExperimentConfig::from_toml(&toml).unwrap();
        assert_eq!(back, ExperimentConfig::from_toml(CFG).unwrap());
    }
}
