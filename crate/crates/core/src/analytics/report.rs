use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    defective_capacity, equipment_letter, operational_ratio, power_and_revenue_loss, rate_site, EconomicsConfig, LossModel,
    Rating, RatingConfig, SiteMetadata,
};
use crate::detect::{DefectClass, Detection, Severity, Verdict};
use crate::Result;

/// Losses are estimated from nameplate capacity; no production data is used.
pub const ESTIMATION_BASIS: &str = "capacity";

/// Everything the rating depends on.
#[derive(Debug, Clone, Copy)]
pub struct ReportInputs<'a> {
    pub site: &'a SiteMetadata,
    pub loss: &'a LossModel,
    pub economics: &'a EconomicsConfig,
    pub rating: &'a RatingConfig,
    pub detections: &'a [Detection],
    pub site_baseline_c: Option<f64>,
    pub panels_total: usize,
    pub panels_inspectable: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionCounts {
    pub total: usize,
    pub accepted: usize,
    pub pending: usize,
    pub rejected: usize,
    /// Accepted and pending detections only.
    pub by_class: BTreeMap<String, usize>,
    pub by_severity: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteHealthReport {
    pub site: SiteMetadata,
    pub estimation_basis: String,
    pub or_ratio: f64,
    pub c_defect_mw: f64,
    pub delta_t_max: f64,
    pub apm: f64,
    /// Active anomalies other than string outages.
    pub a_total: usize,
    pub letters: Rating,
    pub rating: String,
    pub power_loss_mw_dc: f64,
    pub revenue_loss_usd: f64,
    pub detections: DetectionCounts,
    pub site_baseline_c: Option<f64>,
    pub panels_total: usize,
    pub panels_inspectable: usize,
    /// File holding per-panel statistics, relative to the results directory.
    pub panel_stats: String,
    pub loss_model: LossModel,
    pub economics: EconomicsConfig,
    pub rating_config: RatingConfig,
}

/// Rates the site over accepted and pending detections; rejected ones are ignored.
pub fn build_report(inputs: &ReportInputs<'_>) -> Result<SiteHealthReport> {
    let site = inputs.site;
    site.validate()?;
    let active: Vec<&Detection> = inputs.detections.iter().filter(|d| d.verdict.is_active()).collect();

    let c_defect_mw = defective_capacity(active.iter().copied(), site, inputs.loss);
    let or_ratio = operational_ratio(site.capacity_mw_dc, c_defect_mw)?;
    let delta_t_max = active.iter().filter_map(|d| d.delta_t).fold(0.0_f64, f64::max);
    let a_total = active.iter().filter(|d| d.class != DefectClass::StringOutage).count();
    let (apm, _) = equipment_letter(a_total, site.capacity_mw_dc)?;
    let letters = rate_site(or_ratio, delta_t_max, apm, &inputs.rating.cuts_for(site.mount_type));
    let (power_loss_mw_dc, revenue_loss_usd) = power_and_revenue_loss(c_defect_mw, inputs.economics);

    let mut counts = DetectionCounts { total: inputs.detections.len(), ..Default::default() };
    for d in inputs.detections {
        match d.verdict {
            Verdict::Accepted => counts.accepted += 1,
            Verdict::Pending => counts.pending += 1,
            Verdict::Rejected => counts.rejected += 1,
        }
    }
    for class in DefectClass::ALL {
        counts.by_class.insert(class.as_str().to_string(), 0);
    }
    for s in Severity::ALL {
        counts.by_severity.insert(s.as_str().to_string(), 0);
    }
    for d in &active {
        *counts.by_class.entry(d.class.as_str().to_string()).or_default() += 1;
        if let Some(s) = d.severity {
            *counts.by_severity.entry(s.as_str().to_string()).or_default() += 1;
        }
    }

    Ok(SiteHealthReport {
        site: site.clone(),
        estimation_basis: ESTIMATION_BASIS.to_string(),
        or_ratio,
        c_defect_mw,
        delta_t_max,
        apm,
        a_total,
        letters,
        rating: letters.to_string(),
        power_loss_mw_dc,
        revenue_loss_usd,
        detections: counts,
        site_baseline_c: inputs.site_baseline_c,
        panels_total: inputs.panels_total,
        panels_inspectable: inputs.panels_inspectable,
        panel_stats: "panels.geojson".to_string(),
        loss_model: *inputs.loss,
        economics: *inputs.economics,
        rating_config: inputs.rating.clone(),
    })
}
