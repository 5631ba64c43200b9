//! Feature dataset file: CSV with header
//! `label,snr_db,channel,frame_seed,sample_count,c20,c21,c22,c40,c41,c42`,
//! one row per frame. Floats are written in shortest round-trip form, so a
//! read-back reproduces every value exactly. Unlabelled rows use `unknown`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use sqcc_core::features::FEATURE_NAMES;
use sqcc_core::{Modulation, SqcVector};

use crate::error::{Error, Result};

pub const UNKNOWN_LABEL: &str = "unknown";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub label: Option<Modulation>,
    pub snr_db: f64,
    pub channel: String,
    pub frame_seed: u64,
    pub features: SqcVector,
}

pub fn header() -> Vec<&'static str> {
    let mut h = vec!["label", "snr_db", "channel", "frame_seed", "sample_count"];
    h.extend(FEATURE_NAMES);
    h
}

pub fn write_records<W: Write>(out: W, records: &[FeatureRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for r in records {
        let mut row = vec![
            r.label.map_or(UNKNOWN_LABEL.to_string(), |m| m.name().to_string()),
            r.snr_db.to_string(),
            r.channel.clone(),
            r.frame_seed.to_string(),
            r.features.sample_count.to_string(),
        ];
        row.extend(r.features.values.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_row(row: &csv::StringRecord) -> std::result::Result<FeatureRecord, String> {
    if row.len() != 11 {
        return Err(format!("expected 11 columns, found {}", row.len()));
    }
    let num = |i: usize| row[i].parse::<f64>().map_err(|e| format!("column {}: {e}", header()[i]));
    let label = match &row[0] {
        UNKNOWN_LABEL => None,
        name => Some(name.parse::<Modulation>().map_err(|e| e.to_string())?),
    };
    let mut values = [0.0; 6];
    for (i, v) in values.iter_mut().enumerate() {
        *v = num(5 + i)?;
    }
    Ok(FeatureRecord {
        label,
        snr_db: num(1)?,
        channel: row[2].to_string(),
        frame_seed: row[3].parse().map_err(|e| format!("frame_seed: {e}"))?,
        features: SqcVector {
            values,
            sample_count: row[4].parse().map_err(|e| format!("sample_count: {e}"))?,
        },
    })
}

pub fn read_records<R: Read>(input: R) -> std::result::Result<Vec<FeatureRecord>, String> {
    let mut r = csv::Reader::from_reader(input);
    let head = r.headers().map_err(|e| e.to_string())?.clone();
    if head.iter().collect::<Vec<_>>() != header() {
        return Err(format!("unexpected header {:?}", head.iter().collect::<Vec<_>>()));
    }
    r.records()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| e.to_string())?;
            parse_row(&row).map_err(|e| format!("row {}: {e}", i + 1))
        })
        .collect()
}

pub fn save(path: &Path, records: &[FeatureRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(std::io::BufWriter::new(file), records)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}

pub fn load(path: &Path) -> Result<Vec<FeatureRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_records(std::io::BufReader::new(file)).map_err(|msg| Error::format(path, "feature dataset", msg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(label: Option<Modulation>, values: [f64; 6]) -> FeatureRecord {
        FeatureRecord {
            label,
            snr_db: -4.0,
            channel: "H1".into(),
            frame_seed: u64::MAX - 3,
            features: SqcVector {
                values,
                sample_count: 20_000,
            },
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(values in prop::array::uniform6(0.0f64..1e6), pick in 0usize..6) {
            let label = Modulation::ALL.get(pick).copied();
            let recs = vec![record(label, values), record(None, [0.1, 0.2, 0.3, 1e-300, 5e300, 0.0])];
            let mut buf = Vec::new();
            write_records(&mut buf, &recs).unwrap();
            prop_assert_eq!(read_records(buf.as_slice()).unwrap(), recs);
        }
    }

    #[test]
    fn header_and_errors() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "label,snr_db,channel,frame_seed,sample_count,c20,c21,c22,c40,c41,c42\n"
        );
        assert!(read_records("a,b\n1,2\n".as_bytes()).is_err());
        let bad = "label,snr_db,channel,frame_seed,sample_count,c20,c21,c22,c40,c41,c42\n64QAM,0,H0,1,2,0,0,0,0,0,0\n";
        assert!(read_records(bad.as_bytes()).is_err());
    }
}
