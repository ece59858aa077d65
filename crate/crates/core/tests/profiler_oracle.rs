use dataloop::profiler::{ingest_csv, profile, ColumnType, IngestOptions, Table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CELLS: [&str; 10] = ["", "NA", "nan", "NULL", "Null", " na", "word", "x y", "true", "-3"];

fn oracle_missing(cell: &str) -> bool {
    matches!(cell.to_lowercase().as_str(), "" | "na" | "nan" | "null")
}

fn random_table(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<Vec<String>>) {
    let cols = rng.gen_range(2..7);
    let rows = rng.gen_range(1..60);
    let headers = (0..cols).map(|c| format!("c{c}")).collect();
    let data = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| match rng.gen_range(0..3) {
                    0 => rng.gen_range(-1000i64..1000).to_string(),
                    1 => format!("{:.3}", rng.gen_range(-50.0f64..50.0)),
                    _ => CELLS[rng.gen_range(0..CELLS.len())].to_string(),
                })
                .collect()
        })
        .collect();
    (headers, data)
}

#[test]
fn missing_counts_match_cell_scan_on_100_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let (headers, data) = random_table(&mut rng);
        let mut csv = headers.join(",") + "\n";
        for row in &data {
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        let table = Table::from_bytes("r.csv", csv.as_bytes(), None).unwrap();
        let p = profile(&table).unwrap();
        assert_eq!((p.n_rows, p.n_cols), (data.len(), headers.len()));
        for (c, col) in p.columns.iter().enumerate() {
            let expected = data.iter().filter(|r| oracle_missing(&r[c])).count();
            assert_eq!(col.missing_count, expected, "column {c} of\n{csv}");
            let present: Vec<&str> = data.iter().map(|r| r[c].as_str()).filter(|v| !oracle_missing(v)).collect();
            if present.is_empty() {
                assert_eq!(col.inferred_type, ColumnType::Unknown);
            }
            if let Some(s) = &col.stats.numeric {
                let xs: Vec<f64> = present.iter().map(|v| v.parse().unwrap()).collect();
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                assert!((s.mean - mean).abs() < 1e-9);
                assert_eq!(s.count, xs.len());
                assert!(s.min <= s.q25 && s.q25 <= s.median && s.median <= s.q75 && s.q75 <= s.max);
                if xs.len() > 1 {
                    let mut var = 0.0;
                    for x in &xs {
                        var += (x - mean) * (x - mean);
                    }
                    assert!((s.std.unwrap() - (var / (xs.len() - 1) as f64).sqrt()).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn clinical_shaped_table_keeps_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("survey.csv");
    let mut csv = String::from("SEQN,age_group,RIDAGEYR,RIAGENDR,PAQ605,BMXBMI,LBXGLU,DIQ010\n");
    for i in 0..6287 {
        let age = rng.gen_range(12..80);
        let glucose = if rng.gen_bool(0.02) { "NA".to_string() } else { format!("{:.1}", rng.gen_range(63.0..405.0)) };
        csv.push_str(&format!(
            "{},{},{age},{},{},{:.1},{glucose},{}\n",
            73564 + i,
            if age >= 65 { "Senior" } else { "Adult" },
            rng.gen_range(1..3),
            rng.gen_range(1..4),
            rng.gen_range(14.5..70.1),
            rng.gen_range(1..4),
        ));
    }
    std::fs::write(&path, csv).unwrap();
    let p = profile(&ingest_csv(&path, &IngestOptions::default()).unwrap()).unwrap();
    assert_eq!((p.n_rows, p.n_cols), (6287, 8));
    let types: Vec<ColumnType> = p.columns.iter().map(|c| c.inferred_type).collect();
    use ColumnType::*;
    assert_eq!(types, [Integer, Categorical, Integer, Integer, Integer, Real, Real, Integer]);
    let glu = &p.columns[6];
    assert!(glu.missing_count > 0 && glu.stats.numeric.as_ref().unwrap().count == 6287 - glu.missing_count);
}

#[test]
fn semicolon_and_tab_files() {
    for (sep, name) in [(";", "semi.csv"), ("\t", "tab.tsv")] {
        let csv = format!("a{sep}b\n1{sep}x\n2{sep}y\n3{sep}NA\n");
        let t = Table::from_bytes(name, csv.as_bytes(), None).unwrap();
        let p = profile(&t).unwrap();
        assert_eq!((p.n_rows, p.n_cols), (3, 2));
        assert_eq!(p.columns[1].missing_count, 1);
    }
}
