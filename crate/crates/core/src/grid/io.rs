use std::fmt::Write as _;
use std::path::Path;

use super::PotentialGrid;
use crate::error::{Error, Result};

/// `S2GRID v1 n m R` followed by one value per line. Values are written in
/// shortest round-trip form, so reading a written file is bit-exact.
pub fn write_s2grid(grid: &PotentialGrid, path: &Path) -> Result<()> {
    std::fs::write(path, to_s2grid(grid))?;
    Ok(())
}

pub fn to_s2grid(grid: &PotentialGrid) -> String {
    let mut s = String::with_capacity(grid.len() * 24 + 32);
    let _ = writeln!(s, "S2GRID v1 {} {} {}", grid.n(), grid.m(), grid.extent());
    for v in grid.values() {
        let _ = writeln!(s, "{v}");
    }
    s
}

pub fn read_s2grid(path: &Path) -> Result<PotentialGrid> {
    parse_s2grid(&std::fs::read_to_string(path)?)
}

pub fn parse_s2grid(text: &str) -> Result<PotentialGrid> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "S2GRID" || fields[1] != "v1" {
        return Err(Error::Format(format!("bad header {header:?}")));
    }
    let bad = |what: &str| Error::Format(format!("bad {what} in header {header:?}"));
    let n: usize = fields[2].parse().map_err(|_| bad("n"))?;
    let m: usize = fields[3].parse().map_err(|_| bad("m"))?;
    let r: f64 = fields[4].parse().map_err(|_| bad("R"))?;
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| l.trim().parse::<f64>().map_err(|_| Error::Format(format!("value {i}: {l:?}"))))
        .collect::<Result<Vec<_>>>()?;
    PotentialGrid::new(n, m, r, values).map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let g = PotentialGrid::from_fn(2, 7, 1.25, |x| (x[0] * 3.1).exp() / 7.0 + x[1].powi(3)).unwrap();
        let back = parse_s2grid(&to_s2grid(&g)).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_s2grid("").is_err());
        assert!(parse_s2grid("S2GRID v2 2 5 1\n").is_err());
        assert!(parse_s2grid("S2GRID v1 2 5 1\n1\n2\n").is_err());
        let mut body = String::from("S2GRID v1 2 5 1\n");
        for _ in 0..24 {
            body.push_str("0\n");
        }
        body.push_str("x\n");
        assert!(matches!(parse_s2grid(&body), Err(Error::Format(_))));
    }
}
