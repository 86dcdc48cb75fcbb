use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::SiteHealthReport;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetSummary {
    pub site_count: usize,
    pub as_of_year: i32,
    pub total_capacity_mw_dc: f64,
    pub mean_or: f64,
    pub per_state_mean_or: BTreeMap<String, f64>,
    /// Share of sites whose three letters are all A or B.
    pub good_or_better_share: f64,
    pub by_capacity_band: BTreeMap<String, usize>,
    pub by_age_band: BTreeMap<String, usize>,
    pub by_mount_type: BTreeMap<String, usize>,
    pub total_power_loss_mw_dc: f64,
    pub total_revenue_loss_usd: f64,
}

pub fn capacity_band(mw: f64) -> &'static str {
    match mw {
        m if m < 5.0 => "a: <5 MW",
        m if m < 25.0 => "b: 5-25 MW",
        m if m < 100.0 => "c: 25-100 MW",
        _ => "d: >=100 MW",
    }
}

pub fn age_band(age_years: i32) -> &'static str {
    match age_years {
        a if a < 5 => "a: <5 y",
        a if a < 10 => "b: 5-10 y",
        _ => "c: >=10 y",
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Folds per-site reports in site-id order. Ages are measured at `as_of_year`
/// and clamped at zero for sites commissioned later.
pub fn aggregate_fleet(reports: &[SiteHealthReport], as_of_year: i32) -> Result<FleetSummary> {
    if reports.is_empty() {
        return Err(Error::InvalidParameter("fleet aggregation needs at least one site report".into()));
    }
    let mut sorted: Vec<&SiteHealthReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.site.site_id.cmp(&b.site.site_id));

    let mut by_state: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut summary = FleetSummary {
        site_count: sorted.len(),
        as_of_year,
        total_capacity_mw_dc: 0.0,
        mean_or: 0.0,
        per_state_mean_or: BTreeMap::new(),
        good_or_better_share: 0.0,
        by_capacity_band: BTreeMap::new(),
        by_age_band: BTreeMap::new(),
        by_mount_type: BTreeMap::new(),
        total_power_loss_mw_dc: 0.0,
        total_revenue_loss_usd: 0.0,
    };
    let mut good = 0usize;
    let mut ors = Vec::with_capacity(sorted.len());
    for r in &sorted {
        by_state.entry(r.site.state.clone()).or_default().push(r.or_ratio);
        ors.push(r.or_ratio);
        good += usize::from(r.letters.is_good_or_better());
        summary.total_capacity_mw_dc += r.site.capacity_mw_dc;
        summary.total_power_loss_mw_dc += r.power_loss_mw_dc;
        summary.total_revenue_loss_usd += r.revenue_loss_usd;
        *summary.by_capacity_band.entry(capacity_band(r.site.capacity_mw_dc).into()).or_default() += 1;
        let age = (as_of_year - r.site.commission_year).max(0);
        *summary.by_age_band.entry(age_band(age).into()).or_default() += 1;
        *summary.by_mount_type.entry(r.site.mount_type.as_str().into()).or_default() += 1;
    }
    summary.per_state_mean_or = by_state.into_iter().map(|(s, v)| (s, mean(&v))).collect();
    summary.mean_or = mean(&ors);
    summary.good_or_better_share = good as f64 / sorted.len() as f64;
    Ok(summary)
}

/// One row per site in site-id order, then a `FLEET` summary row.
pub fn write_fleet_csv<W: Write>(reports: &[SiteHealthReport], summary: &FleetSummary, out: W) -> Result<()> {
    let mut sorted: Vec<&SiteHealthReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.site.site_id.cmp(&b.site.site_id));
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::InvalidParameter(format!("csv write failed: {e}"));
    w.write_record([
        "site_id",
        "state",
        "capacity_mw_dc",
        "mount_type",
        "commission_year",
        "or_ratio",
        "delta_t_max",
        "apm",
        "rating",
        "good_or_better",
        "power_loss_mw_dc",
        "revenue_loss_usd",
    ])
    .map_err(csv_err)?;
    for r in sorted {
        w.write_record([
            r.site.site_id.clone(),
            r.site.state.clone(),
            r.site.capacity_mw_dc.to_string(),
            r.site.mount_type.as_str().to_string(),
            r.site.commission_year.to_string(),
            r.or_ratio.to_string(),
            r.delta_t_max.to_string(),
            r.apm.to_string(),
            r.rating.clone(),
            r.letters.is_good_or_better().to_string(),
            r.power_loss_mw_dc.to_string(),
            r.revenue_loss_usd.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.write_record([
        "FLEET".to_string(),
        String::new(),
        summary.total_capacity_mw_dc.to_string(),
        String::new(),
        String::new(),
        summary.mean_or.to_string(),
        String::new(),
        String::new(),
        String::new(),
        summary.good_or_better_share.to_string(),
        summary.total_power_loss_mw_dc.to_string(),
        summary.total_revenue_loss_usd.to_string(),
    ])
    .map_err(csv_err)?;
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{build_report, test_site, EconomicsConfig, LossModel, MountType, RatingConfig, ReportInputs};

    fn site_report(id: &str, state: &str, or_ratio: f64, rating: &str) -> SiteHealthReport {
        let mut site = test_site(10.0);
        site.site_id = id.into();
        site.state = state.into();
        let mut r = build_report(&ReportInputs {
            site: &site,
            loss: &LossModel::default(),
            economics: &EconomicsConfig::default(),
            rating: &RatingConfig::default(),
            detections: &[],
            site_baseline_c: None,
            panels_total: 0,
            panels_inspectable: 0,
        })
        .unwrap();
        r.or_ratio = or_ratio;
        let l: Vec<_> = rating
            .chars()
            .map(|c| match c {
                'A' => crate::analytics::Letter::A,
                'B' => crate::analytics::Letter::B,
                'C' => crate::analytics::Letter::C,
                _ => crate::analytics::Letter::D,
            })
            .collect();
        r.letters = crate::analytics::Rating { operating: l[0], temperature: l[1], equipment: l[2] };
        r.rating = rating.into();
        r
    }

    #[test]
    fn share_of_good_sites() {
        let one = aggregate_fleet(&[site_report("a", "TX", 1.0, "AAA")], 2025).unwrap();
        assert_eq!(one.good_or_better_share, 1.0);
        let two = aggregate_fleet(&[site_report("a", "TX", 1.0, "AAA"), site_report("b", "TX", 0.5, "DDD")], 2025).unwrap();
        assert_eq!(two.good_or_better_share, 0.5);
        let edge = aggregate_fleet(&[site_report("a", "TX", 1.0, "BBB"), site_report("b", "TX", 1.0, "ABC")], 2025).unwrap();
        assert_eq!(edge.good_or_better_share, 0.5);
        assert!(aggregate_fleet(&[], 2025).is_err());
    }

    #[test]
    fn per_state_means_match_an_oracle() {
        let reports = [site_report("t1", "TX", 0.9, "CAA"), site_report("c1", "CA", 0.8, "CAA"), site_report("t2", "TX", 1.0, "AAA")];
        let s = aggregate_fleet(&reports, 2025).unwrap();
        assert!((s.per_state_mean_or["TX"] - 0.95).abs() < 1e-12);
        assert_eq!(s.per_state_mean_or["CA"], 0.8);
        assert_eq!(s.by_mount_type[MountType::GroundFixed.as_str()], 3);
        assert_eq!(s.by_age_band["b: 5-10 y"], 3);
        assert_eq!(s.by_capacity_band["b: 5-25 MW"], 3);
    }

    #[test]
    fn csv_has_one_row_per_site_plus_summary() {
        let reports = [site_report("b", "TX", 0.9, "CAA"), site_report("a", "CA", 0.8, "CAA"), site_report("c", "TX", 1.0, "AAA")];
        let s = aggregate_fleet(&reports, 2025).unwrap();
        let mut buf = Vec::new();
        write_fleet_csv(&reports, &s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("a,CA,"));
        assert!(lines[4].starts_with("FLEET,"));
    }

    #[test]
    fn bands() {
        assert_eq!(capacity_band(0.8), "a: <5 MW");
        assert_eq!(capacity_band(25.0), "c: 25-100 MW");
        assert_eq!(capacity_band(100.0), "d: >=100 MW");
        assert_eq!(age_band(0), "a: <5 y");
        assert_eq!(age_band(10), "c: >=10 y");
    }
}
