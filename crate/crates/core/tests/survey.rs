use std::fs::File;

use plumewatch::survey::*;
use plumewatch::Error;
use proptest::prelude::*;

/// Midranks of |d| over nonzero diffs, then P(W >= w+) and P(W = w+) by
/// walking all 2^n sign patterns.
fn enumerate(diffs: &[f64]) -> (f64, f64, f64) {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let ranks: Vec<f64> = nz
        .iter()
        .map(|d| {
            let below = nz.iter().filter(|e| e.abs() < d.abs()).count() as f64;
            let equal = nz.iter().filter(|e| e.abs() == d.abs()).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let w: f64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let n = nz.len();
    let (mut ge, mut eq) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if s >= w - 1e-9 {
            ge += 1;
        }
        if (s - w).abs() < 1e-9 {
            eq += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (w, ge as f64 / total, eq as f64 / total)
}

fn half_points() -> impl Strategy<Value = f64> {
    (-8i32..=8).prop_map(|k| f64::from(k) / 2.0)
}

proptest! {
    #[test]
    fn exact_matches_enumeration(diffs in prop::collection::vec(half_points(), 1..=12)) {
        prop_assume!(diffs.iter().any(|d| *d != 0.0));
        let r = wilcoxon_right(&diffs).unwrap();
        let (w, p, _) = enumerate(&diffs);
        prop_assert_eq!(r.method, Method::Exact);
        prop_assert_eq!(r.w_plus, w);
        prop_assert!((r.p_right - p).abs() < 1e-10);
    }

    #[test]
    fn tails_overlap_only_at_the_observed_point(diffs in prop::collection::vec(half_points(), 1..=12)) {
        prop_assume!(diffs.iter().any(|d| *d != 0.0));
        let r = wilcoxon_right(&diffs).unwrap();
        let (_, _, point) = enumerate(&diffs);
        prop_assert!(r.p_right + r.p_left >= 1.0 - 1e-12);
        prop_assert!((r.p_right + r.p_left - 1.0 - point).abs() < 1e-10);
        let neg: Vec<f64> = diffs.iter().map(|d| -d).collect();
        let flipped = wilcoxon_right(&neg).unwrap();
        prop_assert!((flipped.p_right - r.p_left).abs() < 1e-12);
    }

    #[test]
    fn p_is_antitone_in_w_plus(
        mags in prop::collection::vec(1u32..20, 2..=16),
        signs in prop::collection::vec(any::<bool>(), 16),
        flip in 0usize..16,
    ) {
        let diffs: Vec<f64> = mags.iter().zip(&signs).map(|(m, s)| if *s { f64::from(*m) } else { -f64::from(*m) }).collect();
        let k = flip % diffs.len();
        prop_assume!(diffs[k] < 0.0);
        let mut more = diffs.clone();
        more[k] = -more[k];
        for method in [Method::Exact, Method::NormalApprox] {
            let a = wilcoxon_right_with(&diffs, Some(method)).unwrap();
            let b = wilcoxon_right_with(&more, Some(method)).unwrap();
            prop_assert!(b.w_plus > a.w_plus);
            prop_assert!(b.p_right <= a.p_right + 1e-15);
        }
    }

    #[test]
    fn results_are_probabilities(diffs in prop::collection::vec(-5.0f64..5.0, 1..40)) {
        prop_assume!(diffs.iter().any(|d| *d != 0.0));
        let r = wilcoxon_right(&diffs).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.p_right));
        prop_assert!((0.0..=1.0).contains(&r.p_left));
        prop_assert_eq!(r.n_effective, diffs.iter().filter(|d| **d != 0.0).count());
    }

    #[test]
    fn participation_is_bounded(
        e in prop::array::uniform5(any::<bool>()),
        d in prop::array::uniform3(any::<bool>()),
        s in prop::array::uniform4(any::<bool>()),
    ) {
        let mut r = base_response();
        r.explore = e;
        r.document = d;
        r.share = s;
        let (a, b, c) = participation_levels(&r);
        prop_assert!(a <= 5 && b <= 3 && c <= 4);
        prop_assert_eq!(a as usize, e.iter().filter(|x| **x).count());
    }
}

fn base_response() -> SurveyResponse {
    SurveyResponse {
        respondent_id: "x".into(),
        explore: [false; 5],
        document: [false; 3],
        share: [false; 4],
        browsing: 1,
        people_discussed: 0,
        meetings: 0,
        age_band: String::new(),
        education_band: String::new(),
        awareness: LikertSet::new([3, 3], [3, 3]),
        self_efficacy: LikertSet::new([3, 3], [3, 3]),
        community_sense: LikertSet::new([3, 3], [3, 3]),
    }
}

#[test]
fn small_known_cases() {
    let r = wilcoxon_right(&[1.0, 2.0, 3.0]).unwrap();
    assert_eq!((r.w_plus, r.p_right), (6.0, 0.125));
    let r = wilcoxon_right(&[-1.0, -2.0, -3.0]).unwrap();
    assert_eq!((r.w_plus, r.p_right), (0.0, 1.0));
    assert!(matches!(wilcoxon_right(&[0.0, 0.0, 0.0]), Err(Error::NoInformation(_))));
}

/// Values printed by tests/oracles/survey_oracle.py for
/// tests/fixtures/survey_cohort.csv (exact rational enumeration).
const COHORT_ORACLE: [(&str, usize, f64, f64, f64, f64); 3] = [
    ("awareness", 15, 93.0, 0.033355712890625, 0.3333333333333333, 0.33030444113724716),
    ("self_efficacy", 15, 115.5, 0.000274658203125, 0.6111111111111112, 0.26363116841820633),
    ("community_sense", 16, 132.5, 0.0001068115234375, 0.75, 0.2860520370076778),
];

#[test]
fn cohort_matches_scripted_oracle() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/survey_cohort.csv");
    let rows = read_survey_csv(File::open(path).unwrap()).unwrap();
    let report = run_study(&rows).unwrap();
    assert_eq!((report.n_rows, report.n_valid, report.n_invalid, report.n_incomplete), (24, 18, 1, 5));
    for (v, (name, n_eff, w, p, mean, ci)) in report.variables.iter().zip(COHORT_ORACLE) {
        assert_eq!(v.variable.as_str(), name);
        let VariableOutcome::Tested(t) = &v.outcome else {
            panic!("{name} not tested")
        };
        assert_eq!(t.method, Method::Exact);
        assert_eq!(t.n_effective, n_eff);
        assert!((t.w_plus - w).abs() < 1e-10, "{name} W+ {}", t.w_plus);
        assert!((t.p_right - p).abs() < 1e-10, "{name} p {}", t.p_right);
        assert!((t.mean_diff - mean).abs() < 1e-10, "{name} mean {}", t.mean_diff);
        assert!((t.ci95_half_width.unwrap() - ci).abs() < 1e-10, "{name} ci {:?}", t.ci95_half_width);
    }
    let explore_total: u64 = report.explore_levels.iter().sum();
    assert_eq!(explore_total, 18);
}

#[test]
fn study_outputs_are_written() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/survey_cohort.csv");
    let rows = read_survey_csv(File::open(path).unwrap()).unwrap();
    let report = run_study(&rows).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_study(&report, dir.path()).unwrap();
    for f in ["study.json", "tests.csv", "participation.csv", "likert.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("study.json")).unwrap()).unwrap();
    assert_eq!(json["n_valid"], 18);
    assert_eq!(json["variables"][1]["outcome"]["status"], "tested");
}
