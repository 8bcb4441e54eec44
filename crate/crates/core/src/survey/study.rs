use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::store::write_atomic;

use super::*;

/// Test outcome for one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VariableOutcome {
    Tested(TestResult),
    /// Every paired difference was zero.
    NoInformation { mean_diff: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableReport {
    pub variable: Variable,
    pub outcome: VariableOutcome,
    /// Respondents per value of after − before, in half-point steps.
    pub diff_distribution: BTreeMap<String, u64>,
    /// Respondents per before score and per after score.
    pub before_distribution: BTreeMap<String, u64>,
    pub after_distribution: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub n_rows: usize,
    pub n_valid: usize,
    pub n_invalid: usize,
    pub n_incomplete: usize,
    pub rejected: Vec<RejectedResponse>,
    pub variables: Vec<VariableReport>,
    /// Respondents per number of ticked choices; indexes are choice counts.
    pub explore_levels: Vec<u64>,
    pub document_levels: Vec<u64>,
    pub share_levels: Vec<u64>,
    pub age_bands: BTreeMap<String, u64>,
    pub education_bands: BTreeMap<String, u64>,
}

fn score_key(x: f64) -> String {
    format!("{x:.1}")
}

/// Screen rows, score every valid response and test each variable.
pub fn run_study(rows: &[SurveyRow]) -> Result<StudyReport> {
    let mut valid = Vec::new();
    let mut rejected = Vec::new();
    for row in rows {
        match row {
            Ok(r) => match r.check() {
                Ok(()) => valid.push(r),
                Err(why) => rejected.push(why),
            },
            Err(why) => rejected.push(why.clone()),
        }
    }
    if valid.len() < 2 {
        return Err(Error::invalid(
            "responses",
            format!("{} valid responses, need at least 2", valid.len()),
        ));
    }

    let mut explore_levels = vec![0u64; 6];
    let mut document_levels = vec![0u64; 4];
    let mut share_levels = vec![0u64; 5];
    let mut age_bands = BTreeMap::new();
    let mut education_bands = BTreeMap::new();
    for r in &valid {
        let (e, d, s) = participation_levels(r);
        explore_levels[e as usize] += 1;
        document_levels[d as usize] += 1;
        share_levels[s as usize] += 1;
        *age_bands.entry(r.age_band.clone()).or_default() += 1;
        *education_bands.entry(r.education_band.clone()).or_default() += 1;
    }

    let mut variables = Vec::new();
    for v in Variable::ALL {
        let mut diffs = Vec::with_capacity(valid.len());
        let mut diff_distribution = BTreeMap::new();
        let mut before_distribution = BTreeMap::new();
        let mut after_distribution = BTreeMap::new();
        for r in &valid {
            let (before, after, diff) = variable_scores(r, v)?;
            diffs.push(diff);
            *diff_distribution.entry(format!("{diff:+.1}")).or_default() += 1;
            *before_distribution.entry(score_key(before)).or_default() += 1;
            *after_distribution.entry(score_key(after)).or_default() += 1;
        }
        let outcome = match wilcoxon_right(&diffs) {
            Ok(t) => VariableOutcome::Tested(t),
            Err(Error::NoInformation(_)) => VariableOutcome::NoInformation { mean_diff: 0.0 },
            Err(e) => return Err(e),
        };
        variables.push(VariableReport {
            variable: v,
            outcome,
            diff_distribution,
            before_distribution,
            after_distribution,
        });
    }

    let count = |k| rejected.iter().filter(|r| r.kind == k).count();
    Ok(StudyReport {
        n_rows: rows.len(),
        n_valid: valid.len(),
        n_invalid: count(Rejection::Invalid),
        n_incomplete: count(Rejection::Incomplete),
        rejected,
        variables,
        explore_levels,
        document_levels,
        share_levels,
        age_bands,
        education_bands,
    })
}

/// Write `study.json`, `tests.csv`, `participation.csv` and `likert.csv`.
pub fn write_study(report: &StudyReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    let json = serde_json::to_vec_pretty(report).map_err(|e| Error::Encode(e.to_string()))?;
    write_atomic(&dir.join("study.json"), &json)?;

    let mut tests = String::from("variable,status,n_total,n_effective,w_plus,p_right,method,mean_diff,ci95_half_width\n");
    for v in &report.variables {
        match &v.outcome {
            VariableOutcome::Tested(t) => {
                let method = match t.method {
                    Method::Exact => "exact",
                    Method::NormalApprox => "normal-approx",
                };
                let ci = t.ci95_half_width.map(|c| c.to_string()).unwrap_or_default();
                writeln!(
                    tests,
                    "{},tested,{},{},{},{},{method},{},{ci}",
                    v.variable, t.n_total, t.n_effective, t.w_plus, t.p_right, t.mean_diff
                )
            }
            VariableOutcome::NoInformation { mean_diff } => writeln!(
                tests,
                "{},no_information,{},0,,,,{mean_diff},",
                v.variable, report.n_valid
            ),
        }
        .expect("write to String");
    }
    write_atomic(&dir.join("tests.csv"), tests.as_bytes())?;

    let mut part = String::from("question,level,respondents\n");
    for (q, levels) in [
        ("explore", &report.explore_levels),
        ("document", &report.document_levels),
        ("share", &report.share_levels),
    ] {
        for (level, n) in levels.iter().enumerate() {
            writeln!(part, "{q},{level},{n}").expect("write to String");
        }
    }
    write_atomic(&dir.join("participation.csv"), part.as_bytes())?;

    let mut likert = String::from("variable,kind,value,respondents\n");
    for v in &report.variables {
        for (kind, dist) in [
            ("before", &v.before_distribution),
            ("after", &v.after_distribution),
            ("diff", &v.diff_distribution),
        ] {
            for (value, n) in dist {
                writeln!(likert, "{},{kind},{value},{n}", v.variable).expect("write to String");
            }
        }
    }
    write_atomic(&dir.join("likert.csv"), likert.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survey::sample;

    #[test]
    fn needs_two_valid() {
        assert!(run_study(&[Ok(sample("a"))]).is_err());
        let mut bad = sample("b");
        bad.browsing = 0;
        assert!(run_study(&[Ok(sample("a")), Ok(bad)]).is_err());
    }

    #[test]
    fn plus_one_everywhere_hits_exact_minimum() {
        let rows: Vec<SurveyRow> = (0..6)
            .map(|i| {
                let mut r = sample(&format!("r{i}"));
                r.community_sense = LikertSet::new([2, 3], [3, 4]);
                Ok(r)
            })
            .collect();
        let report = run_study(&rows).unwrap();
        let cs = &report.variables[2];
        let VariableOutcome::Tested(t) = &cs.outcome else { panic!() };
        // All six diffs tie at +1: only the all-positive assignment reaches W+.
        assert_eq!(t.p_right, 1.0 / 64.0);
        assert_eq!(t.mean_diff, 1.0);
        assert_eq!(t.ci95_half_width, Some(0.0));
        assert!(matches!(report.variables[1].outcome, VariableOutcome::NoInformation { .. }));
        assert_eq!(report.explore_levels[3], 6);
    }

    #[test]
    fn rejections_are_counted() {
        let mut inc = sample("c");
        inc.awareness.before[0] = None;
        let rows = vec![
            Ok(sample("a")),
            Ok(sample("b")),
            Ok(inc),
            Err(RejectedResponse {
                respondent_id: "d".into(),
                kind: Rejection::Invalid,
                reason: "meetings".into(),
            }),
        ];
        let report = run_study(&rows).unwrap();
        assert_eq!((report.n_rows, report.n_valid, report.n_invalid, report.n_incomplete), (4, 2, 1, 1));
        let dir = tempfile::tempdir().unwrap();
        write_study(&report, dir.path()).unwrap();
        let tests = std::fs::read_to_string(dir.path().join("tests.csv")).unwrap();
        assert_eq!(tests.lines().count(), 4);
        assert!(tests.contains("self_efficacy,no_information"));
    }
}
