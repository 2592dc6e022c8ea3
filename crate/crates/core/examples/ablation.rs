//! Full cumulative ablation on the default two-listener testbed.
//!
//! Run with `cargo run --release --example ablation [out_dir]`.

use std::time::Instant;

use psz::ablation::{emit_report, run_ablation, AblationPlan, ReportFormat};
use psz::atf::Stage;
use psz::geometry::Scene;
use psz::metrics::Metric;

fn main() -> psz::Result<()> {
    let plan = AblationPlan::new("testbed", Scene::testbed())?;
    let start = Instant::now();
    let report = run_ablation(&plan)?;
    println!("ablation finished in {:.1} s (eval stage {})", start.elapsed().as_secs_f64(), plan.eval_stage);

    println!("{:<6}{:>10}{:>9}{:>9}{:>9}", "stage", "listener", "IZI", "IPI", "XTC");
    for &stage in &report.stages {
        for k in 1..=report.n_listeners {
            let v = |m| report.broadband(stage, k, m).unwrap();
            println!(
                "{:<6}{:>10}{:>9.2}{:>9.2}{:>9.2}",
                stage.to_string(),
                k,
                v(Metric::Izi),
                v(Metric::Ipi),
                v(Metric::Xtc)
            );
        }
    }
    println!("\nincrements (dB)");
    for d in &report.deltas {
        println!("  {}-{} {:<8} listener{} {} {:+.2}", d.to, d.from, d.component(), d.listener, d.metric, d.delta_db);
    }

    let best = report
        .stages
        .iter()
        .max_by(|a, b| {
            let xtc = |s: &Stage| report.broadband(*s, 1, Metric::Xtc).unwrap();
            xtc(a).total_cmp(&xtc(b))
        })
        .unwrap();
    println!("\nbest XTC design for listener 1: {best}");

    if let Some(dir) = std::env::args().nth(1) {
        let dir = std::path::Path::new(&dir);
        let mut files = emit_report(&report, dir, ReportFormat::Csv)?;
        files.extend(emit_report(&report, dir, ReportFormat::Json)?);
        println!("wrote {} files to {}", files.len(), dir.display());
    }
    Ok(())
}
