//! Run the paired one-sided tests on the bundled survey cohort.

use std::fs::File;

use plumewatch::survey::{read_survey_csv, run_study, wilcoxon_right, VariableOutcome};

fn main() -> plumewatch::Result<()> {
    let r = wilcoxon_right(&[1.0, 2.0, 3.0])?;
    println!("(+1, +2, +3): W+ = {}, p = {}", r.w_plus, r.p_right);

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/survey_cohort.csv");
    let rows = read_survey_csv(File::open(path).expect("cohort fixture"))?;
    let report = run_study(&rows)?;
    println!("{} valid of {} responses", report.n_valid, report.n_rows);
    for v in &report.variables {
        match &v.outcome {
            VariableOutcome::Tested(t) => println!(
                "{:16} n = {:2}  W+ = {:6}  p = {:.6}  mean diff {:.3} ± {:.3}",
                v.variable.as_str(),
                t.n_effective,
                t.w_plus,
                t.p_right,
                t.mean_diff,
                t.ci95_half_width.unwrap_or(f64::NAN)
            ),
            VariableOutcome::NoInformation { .. } => println!("{}: no information", v.variable.as_str()),
        }
    }
    Ok(())
}
