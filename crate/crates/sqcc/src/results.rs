//! Evaluation tables and their CSV forms.
//!
//! A results file has one row per (channel, SNR):
//! `channel,snr_db,pcc,n_frames,<T>-><P>...,n_rejected`, where the
//! confusion counts are flattened row-major (true class major) and the
//! column names spell out the class order.

use std::fs;
use std::io::Write;
use std::path::Path;

use sqcc_core::{ConfusionMatrix, Modulation};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub channel: String,
    pub snr_db: f64,
    pub confusion: ConfusionMatrix,
}

impl ResultRow {
    pub fn pcc(&self) -> f64 {
        self.confusion.pcc().unwrap_or(0.0)
    }

    pub fn n_frames(&self) -> u64 {
        self.confusion.total()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub classes: Vec<Modulation>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn pcc_at(&self, channel: &str, snr_db: f64) -> Option<f64> {
        self.row(channel, snr_db).map(ResultRow::pcc)
    }

    pub fn row(&self, channel: &str, snr_db: f64) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.channel == channel && (r.snr_db - snr_db).abs() < 1e-9)
    }

    pub fn channels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.channel) {
                out.push(r.channel.clone());
            }
        }
        out
    }

    /// Rows of one channel only.
    pub fn for_channel(&self, channel: &str) -> ResultTable {
        ResultTable {
            classes: self.classes.clone(),
            rows: self.rows.iter().filter(|r| r.channel == channel).cloned().collect(),
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["channel", "snr_db", "pcc", "n_frames"].map(String::from).to_vec();
        for t in &self.classes {
            for p in &self.classes {
                h.push(format!("{t}->{p}"));
            }
        }
        h.push("n_rejected".into());
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for r in &self.rows {
            let mut rec = vec![
                r.channel.clone(),
                r.snr_db.to_string(),
                r.pcc().to_string(),
                r.n_frames().to_string(),
            ];
            rec.extend(r.confusion.counts.iter().flatten().map(u64::to_string));
            rec.push(r.confusion.rejected.iter().sum::<u64>().to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_with(path, |f| self.write_csv(f))
    }
}

/// Wide summary for plotting: `snr_db,<channel>...` with Pcc in each cell.
pub fn write_summary<W: Write>(tables: &[ResultTable], out: W) -> csv::Result<()> {
    let mut channels: Vec<String> = Vec::new();
    let mut snrs: Vec<f64> = Vec::new();
    for t in tables {
        for r in &t.rows {
            if !channels.contains(&r.channel) {
                channels.push(r.channel.clone());
            }
            if !snrs.iter().any(|s| (s - r.snr_db).abs() < 1e-9) {
                snrs.push(r.snr_db);
            }
        }
    }
    snrs.sort_by(f64::total_cmp);
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["snr_db".to_string()];
    head.extend(channels.iter().cloned());
    w.write_record(&head)?;
    for s in snrs {
        let mut rec = vec![s.to_string()];
        for c in &channels {
            let cell = tables.iter().find_map(|t| t.pcc_at(c, s));
            rec.push(cell.map_or(String::new(), |p| p.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_summary(path: &Path, tables: &[ResultTable]) -> Result<()> {
    write_with(path, |f| write_summary(tables, f))
}

pub(crate) fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(std::io::BufWriter<fs::File>) -> csv::Result<()>,
{
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f(std::io::BufWriter::new(file)).map_err(|e| Error::io(path, std::io::Error::other(e)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let classes = vec![Modulation::Bpsk, Modulation::Qpsk];
        let mut cm = ConfusionMatrix::new(classes.clone());
        cm.counts = vec![vec![9, 1], vec![0, 10]];
        let table = ResultTable {
            classes,
            rows: vec![ResultRow {
                channel: "H1".into(),
                snr_db: 4.0,
                confusion: cm,
            }],
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "channel,snr_db,pcc,n_frames,BPSK->BPSK,BPSK->QPSK,QPSK->BPSK,QPSK->QPSK,n_rejected\n\
             H1,4,0.95,20,9,1,0,10,0\n"
        );
        let mut buf = Vec::new();
        write_summary(&[table], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "snr_db,H1\n4,0.95\n");
    }
}
