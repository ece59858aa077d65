use std::fmt::Write;

use super::DatasetProfile;

pub(crate) fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x:.0}")
    } else {
        format!("{x:.4}")
    }
}

fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(header.to_vec()));
    for row in rows {
        let _ = writeln!(out, "{}", line(row.iter().map(String::as_str).collect()));
    }
}

/// Plain-text profile block embedded in the programmer's system prompt.
/// Output is byte-for-byte deterministic for a given profile.
pub fn render_profile_text(profile: &DatasetProfile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "path: {}", profile.path);
    let _ = writeln!(out, "rows: {}", profile.n_rows);
    let _ = writeln!(out, "columns: {}", profile.n_cols);
    out.push('\n');

    out.push_str("Column overview:\n");
    let rows: Vec<Vec<String>> = profile
        .columns
        .iter()
        .map(|c| vec![c.name.clone(), c.inferred_type.as_str().to_string(), c.missing_count.to_string()])
        .collect();
    table(&mut out, &["column", "type", "missing"], &rows);

    let numeric: Vec<Vec<String>> = profile
        .columns
        .iter()
        .filter_map(|c| c.stats.numeric.as_ref().map(|s| (c, s)))
        .map(|(c, s)| {
            vec![
                c.name.clone(),
                s.count.to_string(),
                fmt_num(s.mean),
                s.std.map_or_else(|| "NaN".to_string(), fmt_num),
                fmt_num(s.min),
                fmt_num(s.q25),
                fmt_num(s.median),
                fmt_num(s.q75),
                fmt_num(s.max),
            ]
        })
        .collect();
    if !numeric.is_empty() {
        out.push_str("\nStatistical description (numeric columns):\n");
        table(&mut out, &["column", "count", "mean", "std", "min", "25%", "50%", "75%", "max"], &numeric);
    }

    let categorical: Vec<String> = profile
        .columns
        .iter()
        .filter_map(|c| c.stats.categorical.as_ref().map(|top| (c, top)))
        .map(|(c, top)| {
            let values: Vec<String> = top.iter().map(|(v, n)| format!("{v} ({n})")).collect();
            format!("{}: {}", c.name, values.join(", "))
        })
        .collect();
    if !categorical.is_empty() {
        out.push_str("\nTop values (categorical columns):\n");
        for line in categorical {
            let _ = writeln!(out, "{line}");
        }
    }
    out
}
