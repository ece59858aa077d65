use crate::error::{Error, Result};

use super::{BucketResult, PassRateResult};

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Io(e.into()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::Io(e.into()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn opt(v: Option<f64>, scale: f64) -> String {
    v.map(|x| format!("{:.2}", x * scale)).unwrap_or_default()
}

pub fn ablation_csv(rows: &[(&str, &PassRateResult)]) -> Result<String> {
    csv_string(
        &["setting", "passed", "total", "pass_rate_pct", "improvement_pct"],
        rows.iter()
            .map(|(name, r)| {
                vec![
                    name.to_string(),
                    r.passed.to_string(),
                    r.total.to_string(),
                    format!("{:.2}", r.percent()),
                    opt(r.improvement_over_baseline, 100.0),
                ]
            })
            .collect(),
    )
}

pub fn ablation_markdown(rows: &[(&str, &PassRateResult)]) -> String {
    let mut s = String::from("| setting | passed | total | pass rate (%) |\n|---|---:|---:|---:|\n");
    for (name, r) in rows {
        let rate = match r.improvement_over_baseline {
            Some(i) => format!("{:.2} ({:.2}%)", r.percent(), i * 100.0),
            None => format!("{:.2}", r.percent()),
        };
        s.push_str(&format!("| {name} | {} | {} | {rate} |\n", r.passed, r.total));
    }
    s
}

pub fn selection_csv(results: &[BucketResult]) -> Result<String> {
    csv_string(
        &["n_apis", "instructions", "correct", "no_choice", "accuracy_pct"],
        results
            .iter()
            .map(|r| {
                vec![r.n_apis.to_string(), r.total.to_string(), r.correct.to_string(), r.no_choice.to_string(), opt(r.accuracy, 100.0)]
            })
            .collect(),
    )
}

pub fn selection_markdown(results: &[BucketResult]) -> String {
    let mut s = String::from("| APIs | instructions | correct | accuracy (%) |\n|---:|---:|---:|---:|\n");
    for r in results {
        let acc = r.accuracy.map(|a| format!("{:.2}", a * 100.0)).unwrap_or_else(|| "-".into());
        s.push_str(&format!("| {} | {} | {} | {acc} |\n", r.n_apis, r.total, r.correct));
    }
    s
}
