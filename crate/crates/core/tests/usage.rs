use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::IpAddr;

use chrono::{DateTime, Duration, FixedOffset, NaiveDate, TimeZone, Utc};
use plumewatch::thumbnail::{Bounds, Origin, OutputFormat, ThumbnailSpec};
use plumewatch::timelapse::DatasetId;
use plumewatch::usage::*;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const IPS: [&str; 6] = ["10.0.0.1", "10.0.0.2", "192.168.1.7", "128.2.4.4", "128.2.9.1", "2001:db8::5"];

fn capture_dates() -> HashMap<DatasetId, NaiveDate> {
    [("a", 1), ("b", 10), ("c", 20)]
        .into_iter()
        .map(|(id, day)| (DatasetId::new(id).unwrap(), NaiveDate::from_ymd_opt(2015, 8, day).unwrap()))
        .collect()
}

struct Request {
    ip: IpAddr,
    at: DateTime<Utc>,
    method: &'static str,
    path: String,
    status: u16,
    spec: Option<ThumbnailSpec>,
}

fn random_spec(rng: &mut StdRng) -> ThumbnailSpec {
    let ds = ["a", "b", "c", "zz"][rng.random_range(0..4)];
    let l = rng.random_range(0..4) * 100;
    ThumbnailSpec {
        dataset_id: DatasetId::new(ds).unwrap(),
        bounds: Bounds::new(l, 0, l + 100, 80),
        out_width: 100,
        out_height: 80,
        start_frame: rng.random_range(0..3),
        nframes: 5,
        fps: 12,
        format: OutputFormat::Gif,
        origin: if rng.random_bool(0.3) { Origin::Algorithm } else { Origin::Human },
    }
}

fn random_requests(seed: u64, n: usize) -> Vec<Request> {
    let mut rng = StdRng::seed_from_u64(seed);
    let start = Utc.with_ymd_and_hms(2015, 7, 30, 0, 0, 0).unwrap();
    (0..n)
        .map(|_| {
            let ip = IPS[rng.random_range(0..IPS.len())].parse().unwrap();
            let at = start + Duration::seconds(rng.random_range(0..60 * 86_400));
            match rng.random_range(0..10) {
                0 => Request { ip, at, method: "POST", path: "/api/thumbnail".into(), status: 201, spec: None },
                1 => Request { ip, at, method: "GET", path: "/api/datasets".into(), status: 200, spec: None },
                _ => {
                    let spec = random_spec(&mut rng);
                    let status = if rng.random_bool(0.1) { 404 } else { 200 };
                    Request { ip, at, method: "GET", path: spec.encode_url(), status, spec: Some(spec) }
                }
            }
        })
        .collect()
}

fn to_lines(reqs: &[Request]) -> Vec<String> {
    let offsets = [FixedOffset::east_opt(0).unwrap(), FixedOffset::west_opt(7 * 3600).unwrap()];
    let mut lines: Vec<String> = reqs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            AccessLogEntry {
                ip: r.ip,
                request_time: r.at.with_timezone(&offsets[i % 2]),
                method: r.method.into(),
                path_and_query: r.path.clone(),
                status: r.status,
                bytes: Some(100),
                referer: None,
                user_agent: Some("test \"agent\"".into()),
            }
            .to_line()
        })
        .collect();
    lines.push("garbage line".into());
    lines.push(String::new());
    lines
}

/// Recount from the generated requests. August and September in New York
/// are a fixed UTC-4, so the view date is simply the UTC time minus 4 h.
struct Recount {
    views: Vec<(Origin, String, i64, IpAddr, DatasetId)>,
    creators: BTreeSet<IpAddr>,
}

fn recount(reqs: &[Request], excluded: &[&str]) -> Recount {
    let dates = capture_dates();
    let mut views = Vec::new();
    let mut creators = BTreeSet::new();
    for r in reqs {
        if excluded.iter().any(|p| r.ip.to_string().starts_with(p)) {
            continue;
        }
        if r.method == "POST" {
            creators.insert(r.ip);
        }
        let Some(spec) = &r.spec else { continue };
        let Some(date) = dates.get(&spec.dataset_id) else { continue };
        if r.status != 200 {
            continue;
        }
        let d = ((r.at - Duration::hours(4)).date_naive() - *date).num_days();
        if d >= 0 {
            views.push((spec.origin, spec.encode_url(), d, r.ip, spec.dataset_id.clone()));
        }
    }
    Recount { views, creators }
}

#[test]
fn analysis_matches_recount() {
    let reqs = random_requests(42, 3000);
    let config = AnalysisConfig {
        exclusions: parse_cidrs("128.2.0.0/16").unwrap(),
        tz: parse_tz("America/New_York").unwrap(),
    };
    let report = analyze_lines(to_lines(&reqs), &capture_dates(), &config);
    let expect = recount(&reqs, &["128.2."]);
    assert_eq!((report.parse.lines, report.parse.malformed), (3001, 1));

    let s = report.summary;
    let by = |o: Origin| expect.views.iter().filter(move |v| v.0 == o);
    assert_eq!(s.views_hg, by(Origin::Human).count() as u64);
    assert_eq!(s.views_ag, by(Origin::Algorithm).count() as u64);
    assert_eq!(s.total_views, expect.views.len() as u64);
    assert_eq!(s.unique_viewed_hg, by(Origin::Human).map(|v| &v.1).collect::<BTreeSet<_>>().len() as u64);
    assert_eq!(s.unique_viewed_ag, by(Origin::Algorithm).map(|v| &v.1).collect::<BTreeSet<_>>().len() as u64);
    assert_eq!(s.users_created_hg, expect.creators.len() as u64);
    let mut everyone: BTreeSet<IpAddr> = expect.views.iter().map(|v| v.3).collect();
    everyone.extend(&expect.creators);
    assert_eq!(s.total_users, everyone.len() as u64);
    assert!(report.users.iter().all(|u| !u.ip.to_string().starts_with("128.2.")));

    let mut d_counts: BTreeMap<i64, u64> = BTreeMap::new();
    for v in &expect.views {
        *d_counts.entry(v.2).or_default() += 1;
    }
    let all = &report.histograms[0];
    assert_eq!(all.filter, "all");
    let nonzero: BTreeMap<i64, u64> = all
        .d
        .iter()
        .filter(|(_, n)| *n > 0)
        .map(|(k, n)| match k {
            BucketKey::Days(d) => (*d, *n),
            BucketKey::Date(_) => panic!("date key on D axis"),
        })
        .collect();
    assert_eq!(nonzero, d_counts);

    for u in &report.users {
        let mine: Vec<_> = expect.views.iter().filter(|v| v.3 == u.ip).collect();
        let hg: Vec<_> = mine.iter().filter(|v| v.0 == Origin::Human).collect();
        assert_eq!(u.n_viewed_hg, hg.len() as u64);
        assert_eq!(u.n_datasets_hg, hg.iter().map(|v| &v.4).collect::<BTreeSet<_>>().len() as u64);
        assert_eq!(u.n_viewed_ag, (mine.len() - hg.len()) as u64);
    }

    let again = analyze_lines(to_lines(&reqs), &capture_dates(), &config);
    assert_eq!(serde_json::to_string(&again.summary).unwrap(), serde_json::to_string(&s).unwrap());
    assert_eq!(again.users, report.users);
}

#[test]
fn report_files_and_log_glob() {
    let dir = tempfile::tempdir().unwrap();
    let reqs = random_requests(7, 200);
    let lines = to_lines(&reqs);
    let (a, b) = lines.split_at(100);
    std::fs::write(dir.path().join("access.log.1"), a.join("\n")).unwrap();
    std::fs::write(dir.path().join("access.log"), b.join("\n")).unwrap();
    let pattern = format!("{}/access.log*", dir.path().display());
    let read = read_log_glob(&pattern).unwrap();
    assert_eq!(read.iter().filter(|l| !l.is_empty()).count(), 201);
    assert!(read_log_glob(&format!("{}/nothing*", dir.path().display())).is_err());

    let config = AnalysisConfig { exclusions: Vec::new(), tz: chrono_tz::UTC };
    let report = analyze_lines(&read, &capture_dates(), &config);
    let out = dir.path().join("out");
    write_report(&report, &out).unwrap();
    for f in ["summary.json", "users.csv", "d_all.csv", "d_human.csv", "view_date_algorithm.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

/// Textbook sum formula over integers, exact until the final square root.
fn pearson_sums(x: &[i64], y: &[i64]) -> Option<f64> {
    let n = x.len() as i128;
    let sx: i128 = x.iter().map(|v| i128::from(*v)).sum();
    let sy: i128 = y.iter().map(|v| i128::from(*v)).sum();
    let sxx: i128 = x.iter().map(|v| i128::from(*v).pow(2)).sum();
    let syy: i128 = y.iter().map(|v| i128::from(*v).pow(2)).sum();
    let sxy: i128 = x.iter().zip(y).map(|(a, b)| i128::from(*a) * i128::from(*b)).sum();
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx == 0 || vy == 0 {
        return None;
    }
    Some((n * sxy - sx * sy) as f64 / ((vx as f64) * (vy as f64)).sqrt())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn pearson_matches_sum_formula(pairs in prop::collection::vec((0i64..60, 0i64..60), 2..80)) {
        let (x, y): (Vec<i64>, Vec<i64>) = pairs.into_iter().unzip();
        let xf: Vec<f64> = x.iter().map(|v| *v as f64).collect();
        let yf: Vec<f64> = y.iter().map(|v| *v as f64).collect();
        let got = pearson(&xf, &yf);
        match (got, pearson_sums(&x, &y)) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b),
            (a, b) => prop_assert_eq!(a, b),
        }
        prop_assert_eq!(got, pearson(&yf, &xf));
        if let Some(r) = got {
            prop_assert!(r.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn histograms_conserve_views(seed in 0u64..1000) {
        let reqs = random_requests(seed, 150);
        let config = AnalysisConfig { exclusions: Vec::new(), tz: chrono_tz::UTC };
        let report = analyze_lines(to_lines(&reqs), &capture_dates(), &config);
        let total = report.summary.total_views;
        for h in &report.histograms {
            let expect = match h.filter.as_str() {
                "human" => report.summary.views_hg,
                "algorithm" => report.summary.views_ag,
                _ => total,
            };
            for hist in [&h.d, &h.dataset_date, &h.view_date] {
                prop_assert_eq!(hist.iter().map(|(_, n)| n).sum::<u64>(), expect);
            }
            prop_assert!(h.d.iter().all(|(k, _)| matches!(k, BucketKey::Days(d) if *d >= 0)));
        }
        prop_assert_eq!(report.summary.views_hg + report.summary.views_ag, total);
        let users: u64 = report.users.iter().map(|u| u.n_viewed_hg + u.n_viewed_ag).sum();
        prop_assert_eq!(users, total);
    }
}

#[test]
fn correlation_matrix_shape() {
    let reqs = random_requests(3, 2000);
    let config = AnalysisConfig { exclusions: Vec::new(), tz: chrono_tz::UTC };
    let report = analyze_lines(to_lines(&reqs), &capture_dates(), &config);
    let m = report.correlation.unwrap();
    for i in 0..5 {
        for j in 0..5 {
            assert_eq!(m.get(i, j), m.get(j, i));
        }
        if m.get(i, i).is_some() {
            assert_eq!(m.get(i, i), Some(1.0));
        }
    }
    let flat = vec![5.0; 10];
    let ramp: Vec<f64> = (0..10).map(f64::from).collect();
    assert_eq!(pearson(&flat, &ramp), None);
    assert_eq!(pearson(&ramp, &ramp), Some(1.0));
}
