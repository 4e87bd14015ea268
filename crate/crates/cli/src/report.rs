//! CSV files with `#` comment lines carrying the config hash.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use varfrac::geometry::Grid;
use varfrac::Result;

pub struct Csv {
    inner: csv::Writer<BufWriter<File>>,
}

impl Csv {
    pub fn create(path: &Path, hash: &str, header: &[&str]) -> Result<Self> {
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "# config_sha256={hash}")?;
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(header).map_err(csv_err)?;
        Ok(Csv { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> varfrac::Error {
    varfrac::Error::Io(std::io::Error::other(e.to_string()))
}

/// Shortest round-trip form, so reruns produce identical bytes.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Two-column `key,value` summary.
pub fn write_summary(path: &Path, hash: &str, rows: &[(&str, String)]) -> Result<()> {
    let mut csv = Csv::create(path, hash, &["key", "value"])?;
    for (k, v) in rows {
        csv.row([*k, v.as_str()])?;
    }
    csv.finish()
}

/// `node,x,y` prefix of a nodal row.
pub fn node_fields(grid: &Grid, node: usize) -> [String; 3] {
    let p = grid.coord(node);
    [node.to_string(), num(p.x), num(p.y)]
}
