use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::net::IpAddr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::thumbnail::Origin;
use crate::timelapse::DatasetId;

use super::{CreationEvent, ImageView};

/// Image and user counts split by human-generated (HG) and
/// algorithm-generated (AG) images.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageSummary {
    pub unique_viewed_hg: u64,
    pub views_hg: u64,
    pub unique_viewed_ag: u64,
    pub views_ag: u64,
    pub total_views: u64,
    pub users_created_hg: u64,
    pub users_viewed_hg: u64,
    pub users_viewed_ag: u64,
    /// Distinct IPs that viewed or created anything.
    pub total_users: u64,
}

pub fn summarize(views: &[ImageView], creations: &[CreationEvent]) -> UsageSummary {
    let mut keys: [HashSet<&str>; 2] = Default::default();
    let mut viewers: [HashSet<IpAddr>; 2] = Default::default();
    let mut counts = [0u64; 2];
    for v in views {
        let i = usize::from(v.origin == Origin::Algorithm);
        keys[i].insert(&v.image_key);
        viewers[i].insert(v.ip);
        counts[i] += 1;
    }
    let creators: HashSet<IpAddr> = creations.iter().map(|c| c.ip).collect();
    let everyone: HashSet<IpAddr> = viewers[0]
        .iter()
        .chain(&viewers[1])
        .chain(&creators)
        .copied()
        .collect();
    UsageSummary {
        unique_viewed_hg: keys[0].len() as u64,
        views_hg: counts[0],
        unique_viewed_ag: keys[1].len() as u64,
        views_ag: counts[1],
        total_views: counts[0] + counts[1],
        users_created_hg: creators.len() as u64,
        users_viewed_hg: viewers[0].len() as u64,
        users_viewed_ag: viewers[1].len() as u64,
        total_users: everyone.len() as u64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Days between capture and view.
    D,
    DatasetDate,
    ViewDate,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::D, Axis::DatasetDate, Axis::ViewDate];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::D => "d",
            Axis::DatasetDate => "dataset_date",
            Axis::ViewDate => "view_date",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BucketKey {
    Days(i64),
    Date(NaiveDate),
}

impl fmt::Display for BucketKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BucketKey::Days(d) => write!(f, "{d}"),
            BucketKey::Date(d) => write!(f, "{d}"),
        }
    }
}

/// View counts per bucket, dense from the first to the last observed bucket.
pub type Histogram = Vec<(BucketKey, u64)>;

/// Count views along `axis`, optionally only those of one origin.
pub fn aggregate(views: &[ImageView], axis: Axis, origin: Option<Origin>) -> Histogram {
    let selected = views.iter().filter(|v| origin.is_none_or(|o| v.origin == o));
    match axis {
        Axis::D => {
            let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
            for v in selected {
                *counts.entry(v.d).or_default() += 1;
            }
            let (Some(&lo), Some(&hi)) = (counts.keys().next(), counts.keys().next_back()) else {
                return Vec::new();
            };
            (lo..=hi)
                .map(|d| (BucketKey::Days(d), counts.get(&d).copied().unwrap_or(0)))
                .collect()
        }
        Axis::DatasetDate | Axis::ViewDate => {
            let mut counts: BTreeMap<NaiveDate, u64> = BTreeMap::new();
            for v in selected {
                let key = if axis == Axis::DatasetDate { v.dataset_date } else { v.view_date };
                *counts.entry(key).or_default() += 1;
            }
            let (Some(&lo), Some(&hi)) = (counts.keys().next(), counts.keys().next_back()) else {
                return Vec::new();
            };
            lo.iter_days()
                .take_while(|d| *d <= hi)
                .map(|d| (BucketKey::Date(d), counts.get(&d).copied().unwrap_or(0)))
                .collect()
        }
    }
}

/// Per-IP usage, the rows of the user-based correlation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserVector {
    pub ip: IpAddr,
    pub n_created_hg: u64,
    pub n_viewed_hg: u64,
    pub n_datasets_hg: u64,
    pub n_viewed_ag: u64,
    pub n_datasets_ag: u64,
}

impl UserVector {
    pub const LABELS: [&'static str; 5] = [
        "n_created_hg",
        "n_viewed_hg",
        "n_datasets_hg",
        "n_viewed_ag",
        "n_datasets_ag",
    ];

    pub fn components(&self) -> [f64; 5] {
        [
            self.n_created_hg as f64,
            self.n_viewed_hg as f64,
            self.n_datasets_hg as f64,
            self.n_viewed_ag as f64,
            self.n_datasets_ag as f64,
        ]
    }
}

/// One vector per IP seen in views or creations, sorted by IP.
pub fn user_vectors(views: &[ImageView], creations: &[CreationEvent]) -> Vec<UserVector> {
    #[derive(Default)]
    struct Acc<'a> {
        created: u64,
        viewed: [u64; 2],
        datasets: [BTreeSet<&'a DatasetId>; 2],
    }
    let mut per_ip: BTreeMap<IpAddr, Acc> = BTreeMap::new();
    for c in creations {
        per_ip.entry(c.ip).or_default().created += 1;
    }
    for v in views {
        let i = usize::from(v.origin == Origin::Algorithm);
        let acc = per_ip.entry(v.ip).or_default();
        acc.viewed[i] += 1;
        acc.datasets[i].insert(&v.dataset_id);
    }
    per_ip
        .into_iter()
        .map(|(ip, a)| UserVector {
            ip,
            n_created_hg: a.created,
            n_viewed_hg: a.viewed[0],
            n_datasets_hg: a.datasets[0].len() as u64,
            n_viewed_ag: a.viewed[1],
            n_datasets_ag: a.datasets[1].len() as u64,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn view(key: &str, origin: Origin, ds: &str, dd: (u32, u32), vd: (u32, u32), ip: &str) -> ImageView {
        let dataset_date = NaiveDate::from_ymd_opt(2015, dd.0, dd.1).unwrap();
        let view_date = NaiveDate::from_ymd_opt(2015, vd.0, vd.1).unwrap();
        ImageView {
            image_key: key.into(),
            origin,
            dataset_id: DatasetId::new(ds).unwrap(),
            dataset_date,
            view_date,
            d: (view_date - dataset_date).num_days(),
            ip: ip.parse().unwrap(),
        }
    }

    fn creation(ip: &str) -> CreationEvent {
        CreationEvent {
            ip: ip.parse().unwrap(),
            time: Utc.with_ymd_and_hms(2015, 8, 3, 0, 0, 0).unwrap(),
        }
    }

    #[test]
    fn empty_summary_is_zero() {
        assert_eq!(summarize(&[], &[]), UsageSummary::default());
        assert!(aggregate(&[], Axis::D, None).is_empty());
        assert!(user_vectors(&[], &[]).is_empty());
    }

    #[test]
    fn d_histogram_is_dense() {
        let vs = vec![
            view("a", Origin::Human, "x", (8, 3), (8, 3), "10.0.0.1"),
            view("a", Origin::Human, "x", (8, 3), (8, 3), "10.0.0.1"),
            view("b", Origin::Algorithm, "x", (8, 3), (8, 10), "10.0.0.1"),
        ];
        let h = aggregate(&vs, Axis::D, None);
        assert_eq!(h.len(), 8);
        assert_eq!(h[0], (BucketKey::Days(0), 2));
        assert_eq!(h[7], (BucketKey::Days(7), 1));
        assert!(h[1..7].iter().all(|(_, n)| *n == 0));
        let ag = aggregate(&vs, Axis::D, Some(Origin::Algorithm));
        assert_eq!(ag, vec![(BucketKey::Days(7), 1)]);
        let hg = aggregate(&vs, Axis::ViewDate, Some(Origin::Human));
        assert_eq!(hg, vec![(BucketKey::Date(NaiveDate::from_ymd_opt(2015, 8, 3).unwrap()), 2)]);
    }

    #[test]
    fn user_vector_counts() {
        let vs = vec![
            view("a", Origin::Human, "x", (8, 3), (8, 3), "10.0.0.1"),
            view("b", Origin::Human, "x", (8, 3), (8, 4), "10.0.0.1"),
            view("c", Origin::Human, "y", (8, 4), (8, 4), "10.0.0.1"),
        ];
        let uv = user_vectors(&vs, &[creation("10.0.0.9")]);
        assert_eq!(uv.len(), 2);
        assert_eq!((uv[0].n_viewed_hg, uv[0].n_datasets_hg, uv[0].n_created_hg), (3, 2, 0));
        assert_eq!(uv[1].components(), [1.0, 0.0, 0.0, 0.0, 0.0]);
        let s = summarize(&vs, &[creation("10.0.0.9"), creation("10.0.0.9")]);
        assert_eq!((s.users_created_hg, s.users_viewed_hg, s.total_users), (1, 1, 2));
        assert_eq!((s.unique_viewed_hg, s.views_hg, s.total_views), (3, 3, 3));
    }
}
