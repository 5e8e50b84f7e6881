//! Readers for the CSV tables this tool writes, used by the `report`
//! subcommand to regenerate plots from existing results.

use crate::plot::{PlotError, Series};

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn parse_table(content: &str) -> Result<Table, PlotError> {
    let mut lines = content.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or(PlotError::Empty)?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let row: Vec<String> = line.split(',').map(str::to_string).collect();
        if row.len() != header.len() {
            return Err(PlotError::Schema(format!(
                "row has {} fields, header has {} ({})",
                row.len(),
                header.len(),
                header.join(",")
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(PlotError::Empty);
    }
    Ok(Table { header, rows })
}

fn parse_f64(s: &str, column: &str) -> Result<f64, PlotError> {
    s.parse::<f64>()
        .map_err(|_| PlotError::Schema(format!("non-numeric value '{s}' in column '{column}'")))
}

fn msd_label(column: &str) -> Option<String> {
    column
        .strip_suffix("_msd_db")
        .map(str::to_string)
        .filter(|s| !s.is_empty())
}

/// A table whose first column is an index (`iteration` or `node`) and whose
/// remaining columns are `<algo>_msd_db` values becomes one series per
/// algorithm.
pub fn indexed_msd_series(content: &str, index_name: &str) -> Result<Vec<Series>, PlotError> {
    let table = parse_table(content)?;
    if table.header.first().map(String::as_str) != Some(index_name) {
        return Err(PlotError::Schema(format!(
            "expected first column '{index_name}', found '{}'",
            table.header.first().cloned().unwrap_or_default()
        )));
    }
    let mut series: Vec<Series> = Vec::new();
    for (c, column) in table.header.iter().enumerate().skip(1) {
        let name = msd_label(column).ok_or_else(|| {
            PlotError::Schema(format!("column '{column}' is not a *_msd_db column"))
        })?;
        let mut points = Vec::with_capacity(table.rows.len());
        for row in &table.rows {
            points.push((
                parse_f64(&row[0], index_name)?,
                parse_f64(&row[c], column)?,
            ));
        }
        series.push(Series { name, points });
    }
    if series.is_empty() {
        return Err(PlotError::Schema(
            "no *_msd_db columns after the index column".into(),
        ));
    }
    Ok(series)
}

/// Long-format sweep table: leading parameter columns, then `algo,msd_db`.
/// The first parameter is the x axis; one series per distinct
/// `(algo, remaining parameters)` combination, in first-appearance order.
pub fn sweep_series(content: &str) -> Result<Vec<Series>, PlotError> {
    let table = parse_table(content)?;
    let ncol = table.header.len();
    if ncol < 3
        || table.header[ncol - 2] != "algo"
        || table.header[ncol - 1] != "msd_db"
    {
        return Err(PlotError::Schema(format!(
            "expected trailing columns 'algo,msd_db', found '{}'",
            table.header.join(",")
        )));
    }
    let x_col = 0;
    let mut series: Vec<Series> = Vec::new();
    for row in &table.rows {
        let mut key = row[ncol - 2].clone();
        for extra in 1..ncol - 2 {
            key.push_str(&format!(" {}={}", table.header[extra], row[extra]));
        }
        let x = parse_f64(&row[x_col], &table.header[x_col])?;
        let y = parse_f64(&row[ncol - 1], "msd_db")?;
        match series.iter_mut().find(|s| s.name == key) {
            Some(s) => s.points.push((x, y)),
            None => series.push(Series {
                name: key,
                points: vec![(x, y)],
            }),
        }
    }
    Ok(series)
}

/// Topology export: a `node,x,y` section followed by an `l,k` edge section.
pub fn topology_data(content: &str) -> Result<(Vec<(f64, f64)>, Vec<(usize, usize)>), PlotError> {
    let mut lines = content.lines();
    if lines.next() != Some("node,x,y") {
        return Err(PlotError::Schema("expected header 'node,x,y'".into()));
    }
    let mut positions = Vec::new();
    let mut edges = Vec::new();
    let mut in_edges = false;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        if line == "l,k" {
            in_edges = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if in_edges {
            if fields.len() != 2 {
                return Err(PlotError::Schema(format!("bad edge row '{line}'")));
            }
            let l: usize = fields[0]
                .parse()
                .map_err(|_| PlotError::Schema(format!("bad edge index '{}'", fields[0])))?;
            let k: usize = fields[1]
                .parse()
                .map_err(|_| PlotError::Schema(format!("bad edge index '{}'", fields[1])))?;
            edges.push((l - 1, k - 1));
        } else {
            if fields.len() != 3 {
                return Err(PlotError::Schema(format!("bad node row '{line}'")));
            }
            positions.push((parse_f64(fields[1], "x")?, parse_f64(fields[2], "y")?));
        }
    }
    if positions.is_empty() {
        return Err(PlotError::Empty);
    }
    Ok((positions, edges))
}
