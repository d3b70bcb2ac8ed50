//! Publication-style tables: significance stars, fixed rounding and
//! human/CSV rendering.

use serde::Serialize;

/// Typographic minus used in rendered tables.
pub const MINUS: char = '\u{2212}';

pub const LEGEND: &str =
    "*** significant at 1% level; ** significant at 5% level; * significant at 10% level.";

/// Stars for a two-sided p-value: `***` for p ≤ 0.01, `**` for p ≤ 0.05,
/// `*` for p ≤ 0.10 (closed bounds, so p = 0.05 gets `**`).
pub fn stars(p: f64) -> &'static str {
    if p.is_nan() {
        ""
    } else if p <= 0.01 {
        "***"
    } else if p <= 0.05 {
        "**"
    } else if p <= 0.10 {
        "*"
    } else {
        ""
    }
}

/// Rounds `|x|` half away from zero at `decimals` places, working on the
/// decimal expansion so that e.g. 0.0385 rounds to 0.039.
fn round_digits(x: f64, decimals: usize) -> (String, String) {
    let s = format!("{:.*}", decimals + 9, x.abs());
    let (int, frac) = s.split_once('.').expect("fixed format has a point");
    let mut digits: Vec<u8> = int.bytes().chain(frac.bytes().take(decimals)).collect();
    let round_up = frac.as_bytes()[decimals] >= b'5';
    if round_up {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, b'1');
                break;
            }
            i -= 1;
            if digits[i] == b'9' {
                digits[i] = b'0';
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let split = digits.len() - decimals;
    let int = String::from_utf8(digits[..split].to_vec()).expect("ascii");
    let frac = String::from_utf8(digits[split..].to_vec()).expect("ascii");
    (int, frac)
}

fn group_thousands(int: &str) -> String {
    let mut out = String::with_capacity(int.len() + int.len() / 3);
    for (i, c) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Fixed-point text with a typographic minus; thousands separators on request.
pub fn format_fixed(x: f64, decimals: usize, thousands: bool) -> String {
    if x.is_nan() {
        return "n/a".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { format!("{MINUS}inf") };
    }
    let (int, frac) = round_digits(x, decimals);
    let is_zero = int.bytes().chain(frac.bytes()).all(|b| b == b'0');
    let mut out = String::new();
    if x < 0.0 && !is_zero {
        out.push(MINUS);
    }
    out.push_str(&if thousands { group_thousands(&int) } else { int });
    if decimals > 0 {
        out.push('.');
        out.push_str(&frac);
    }
    out
}

pub fn format_count(n: usize, thousands: bool) -> String {
    let s = n.to_string();
    if thousands {
        group_thousands(&s)
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateCell {
    pub coef: f64,
    pub se: f64,
    pub p: f64,
}

impl EstimateCell {
    pub fn coef_text(&self) -> String {
        format!("{}{}", format_fixed(self.coef, 3, false), stars(self.p))
    }

    pub fn se_text(&self) -> String {
        format!("({})", format_fixed(self.se, 3, false))
    }

    /// `coef*** (se)` on one line.
    pub fn inline(&self) -> String {
        format!("{} {}", self.coef_text(), self.se_text())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Cell {
    Empty,
    Estimate(EstimateCell),
    Number { value: f64, decimals: usize },
    Count(usize),
    Check,
    Text(String),
    /// Estimation failed for this cell; the message goes to the notes.
    Failed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Human,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "human" => Ok(Format::Human),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown format `{s}` (expected human or csv)")),
        }
    }
}

impl Cell {
    pub fn number(value: f64, decimals: usize) -> Self {
        Cell::Number { value, decimals }
    }

    /// Text lines of this cell; estimates take two lines in human output.
    fn lines(&self, f: Format) -> Vec<String> {
        let human = f == Format::Human;
        match self {
            Cell::Empty => vec![String::new()],
            Cell::Estimate(e) if human => vec![e.coef_text(), e.se_text()],
            Cell::Estimate(e) => vec![e.inline()],
            Cell::Number { value, decimals } => vec![format_fixed(*value, *decimals, human)],
            Cell::Count(n) => vec![format_count(*n, human)],
            Cell::Check => vec!["\u{2713}".into()],
            Cell::Text(t) => vec![t.clone()],
            Cell::Failed(_) => vec!["n/a".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub label: String,
    pub cells: Vec<Cell>,
}

impl Row {
    pub fn new(label: impl Into<String>, cells: Vec<Cell>) -> Self {
        Self {
            label: label.into(),
            cells,
        }
    }
}

/// A rendered-ready table: header rows, estimate body, footer statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderedTable {
    pub title: String,
    /// Each header row has one entry per value column; equal adjacent
    /// entries in the first row are drawn as one spanning group.
    pub headers: Vec<Vec<String>>,
    pub body: Vec<Row>,
    pub footer: Vec<Row>,
    pub notes: Vec<String>,
    pub legend: bool,
}

fn width(s: &str) -> usize {
    s.chars().count()
}

fn centre(s: &str, w: usize) -> String {
    let len = width(s);
    if len >= w {
        return s.to_string();
    }
    let left = (w - len) / 2;
    format!("{}{}{}", " ".repeat(left), s, " ".repeat(w - len - left))
}

impl RenderedTable {
    pub fn ncols(&self) -> usize {
        self.headers
            .iter()
            .map(Vec::len)
            .chain(self.body.iter().chain(&self.footer).map(|r| r.cells.len()))
            .max()
            .unwrap_or(0)
    }

    fn failure_notes(&self) -> Vec<String> {
        let last_header = self.headers.last();
        let mut out = Vec::new();
        for row in self.body.iter().chain(&self.footer) {
            for (j, c) in row.cells.iter().enumerate() {
                if let Cell::Failed(msg) = c {
                    let col = last_header
                        .and_then(|h| h.get(j))
                        .cloned()
                        .unwrap_or_else(|| format!("column {}", j + 1));
                    out.push(format!("n/a in {col}, row `{}`: {msg}", row.label));
                }
            }
        }
        out
    }

    pub fn render(&self, f: Format) -> String {
        match f {
            Format::Human => self.render_human(),
            Format::Csv => self.render_csv(),
        }
    }

    pub fn render_human(&self) -> String {
        let nc = self.ncols();
        let f = Format::Human;
        let label_w = self
            .body
            .iter()
            .chain(&self.footer)
            .map(|r| width(&r.label))
            .max()
            .unwrap_or(0)
            .max(1);
        let mut col_w = vec![1usize; nc];
        for (ri, h) in self.headers.iter().enumerate() {
            if ri == 0 && self.headers.len() > 1 {
                continue; // group row handled via spans below
            }
            for (j, s) in h.iter().enumerate() {
                col_w[j] = col_w[j].max(width(s));
            }
        }
        for r in self.body.iter().chain(&self.footer) {
            for (j, c) in r.cells.iter().enumerate() {
                for l in c.lines(f) {
                    col_w[j] = col_w[j].max(width(&l));
                }
            }
        }
        const GAP: usize = 2;
        // widen spans so group labels fit
        let spans = self.header_spans();
        for &(start, len, ref name) in &spans {
            let span_w: usize = col_w[start..start + len].iter().sum::<usize>() + GAP * (len - 1);
            let need = width(name);
            if need > span_w {
                let extra = need - span_w;
                for k in 0..extra {
                    col_w[start + k % len] += 1;
                }
            }
        }
        let total = label_w + col_w.iter().map(|w| w + GAP).sum::<usize>();
        let rule = "-".repeat(total);
        let mut out = String::new();
        out.push_str(&self.title);
        out.push_str("\n\n");

        let line = |label: &str, parts: &[String]| -> String {
            // width padding counts chars, so ² and − are fine
            let mut s = format!("{label:<label_w$}");
            for p in parts {
                s.push_str(&" ".repeat(GAP));
                s.push_str(p);
            }
            s.trim_end().to_string()
        };

        for (ri, h) in self.headers.iter().enumerate() {
            if ri == 0 && self.headers.len() > 1 {
                let parts: Vec<String> = spans
                    .iter()
                    .map(|(start, len, name)| {
                        let w = col_w[*start..start + len].iter().sum::<usize>() + GAP * (len - 1);
                        centre(name, w)
                    })
                    .collect();
                out.push_str(&line("", &parts));
            } else {
                let parts: Vec<String> = (0..nc)
                    .map(|j| centre(h.get(j).map_or("", String::as_str), col_w[j]))
                    .collect();
                out.push_str(&line("", &parts));
            }
            out.push('\n');
        }
        out.push_str(&rule);
        out.push('\n');
        let emit_rows = |rows: &[Row], out: &mut String| {
            for r in rows {
                let cells: Vec<Vec<String>> = (0..nc)
                    .map(|j| r.cells.get(j).unwrap_or(&Cell::Empty).lines(f))
                    .collect();
                let height = cells.iter().map(Vec::len).max().unwrap_or(1);
                for k in 0..height {
                    let parts: Vec<String> = cells
                        .iter()
                        .enumerate()
                        .map(|(j, ls)| centre(ls.get(k).map_or("", String::as_str), col_w[j]))
                        .collect();
                    out.push_str(&line(if k == 0 { &r.label } else { "" }, &parts));
                    out.push('\n');
                }
            }
        };
        emit_rows(&self.body, &mut out);
        if !self.footer.is_empty() {
            out.push_str(&rule);
            out.push('\n');
            emit_rows(&self.footer, &mut out);
        }
        out.push_str(&rule);
        out.push('\n');
        let mut notes = Vec::new();
        if self.legend {
            notes.push(LEGEND.to_string());
        }
        notes.extend(self.notes.iter().cloned());
        notes.extend(self.failure_notes());
        if !notes.is_empty() {
            out.push_str("Notes: ");
            out.push_str(&notes.join(" "));
            out.push('\n');
        }
        out
    }

    /// Contiguous runs of equal names in the first header row.
    fn header_spans(&self) -> Vec<(usize, usize, String)> {
        let nc = self.ncols();
        let Some(first) = self.headers.first() else {
            return Vec::new();
        };
        let mut spans: Vec<(usize, usize, String)> = Vec::new();
        for j in 0..nc {
            let name = first.get(j).cloned().unwrap_or_default();
            match spans.last_mut() {
                Some((_, len, last)) if *last == name && !name.is_empty() => *len += 1,
                _ => spans.push((j, 1, name)),
            }
        }
        spans
    }

    pub fn render_csv(&self) -> String {
        let nc = self.ncols();
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        let f = Format::Csv;
        let write = |w: &mut csv::Writer<Vec<u8>>, rec: Vec<String>| {
            w.write_record(&rec).expect("writing to memory");
        };
        write(&mut w, vec![self.title.clone()]);
        for h in &self.headers {
            let mut rec = vec![String::new()];
            rec.extend((0..nc).map(|j| h.get(j).cloned().unwrap_or_default()));
            write(&mut w, rec);
        }
        for r in self.body.iter().chain(&self.footer) {
            let mut rec = vec![r.label.clone()];
            rec.extend((0..nc).map(|j| {
                r.cells.get(j).unwrap_or(&Cell::Empty).lines(f).join(" ")
            }));
            write(&mut w, rec);
        }
        let mut notes = Vec::new();
        if self.legend {
            notes.push(LEGEND.to_string());
        }
        notes.extend(self.notes.iter().cloned());
        notes.extend(self.failure_notes());
        for n in notes {
            write(&mut w, vec![format!("Note: {n}")]);
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8")
    }
}

/// One column of an estimation table.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ColumnResult {
    /// Spanning group, e.g. the outcome.
    pub group: String,
    /// Second header line, e.g. `OLS` or a subgroup label.
    pub method: String,
    /// `Err` holds the failure message.
    pub estimate: Option<Result<EstimateCell, String>>,
    pub n: Option<usize>,
    pub dep_mean: Option<f64>,
    pub treat_mean: Option<f64>,
    pub adj_r2: Option<f64>,
    pub first_stage_f: Option<f64>,
    /// `Some(None)`: exactly identified, J has no p-value.
    pub hansen_p: Option<Option<f64>>,
    /// First-stage coefficient of an external instrument.
    pub instrument_first_stage: Option<EstimateCell>,
}

/// Layout options for [`estimation_table`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TableLayout {
    pub title: String,
    /// Label of the estimate row, e.g. `Drug use`.
    pub row_label: String,
    /// Optional difference row (one entry per column).
    pub difference: Option<Vec<Cell>>,
    /// Label of the first-stage instrument row when reported.
    pub instrument_label: Option<String>,
    /// Rows of check marks, e.g. `Control variables`.
    pub check_rows: Vec<String>,
    pub notes: Vec<String>,
}

pub fn roman(mut n: usize) -> String {
    const TABLE: [(usize, &str); 13] = [
        (1000, "M"),
        (900, "CM"),
        (500, "D"),
        (400, "CD"),
        (100, "C"),
        (90, "XC"),
        (50, "L"),
        (40, "XL"),
        (10, "X"),
        (9, "IX"),
        (5, "V"),
        (4, "IV"),
        (1, "I"),
    ];
    let mut s = String::new();
    for &(v, r) in &TABLE {
        while n >= v {
            s.push_str(r);
            n -= v;
        }
    }
    s
}

/// Lays out regression columns the way the published tables do: estimate
/// with SE beneath, optional difference row, then fit statistics.
pub fn estimation_table(layout: &TableLayout, columns: &[ColumnResult]) -> RenderedTable {
    let headers = vec![
        columns.iter().map(|c| c.group.clone()).collect(),
        columns.iter().map(|c| c.method.clone()).collect(),
        (1..=columns.len()).map(|i| format!("({})", roman(i))).collect(),
    ];
    let mut body = vec![Row::new(
        layout.row_label.clone(),
        columns
            .iter()
            .map(|c| match &c.estimate {
                Some(Ok(e)) => Cell::Estimate(*e),
                Some(Err(m)) => Cell::Failed(m.clone()),
                None => Cell::Empty,
            })
            .collect(),
    )];
    if let Some(d) = &layout.difference {
        body.push(Row::new("Difference", d.clone()));
    }
    if let Some(label) = &layout.instrument_label {
        body.push(Row::new(
            label.clone(),
            columns
                .iter()
                .map(|c| c.instrument_first_stage.map_or(Cell::Empty, Cell::Estimate))
                .collect(),
        ));
    }
    let mut footer = Vec::new();
    let mut push_if = |label: &str, cells: Vec<Cell>| {
        if cells.iter().any(|c| *c != Cell::Empty) {
            footer.push(Row::new(label, cells));
        }
    };
    let num = |v: Option<f64>| v.map_or(Cell::Empty, |x| Cell::number(x, 3));
    push_if("Adjusted R\u{b2}", columns.iter().map(|c| num(c.adj_r2)).collect());
    push_if(
        "No. of observations",
        columns.iter().map(|c| c.n.map_or(Cell::Empty, Cell::Count)).collect(),
    );
    push_if("Mean of dependent variable", columns.iter().map(|c| num(c.dep_mean)).collect());
    push_if("Mean of independent variable", columns.iter().map(|c| num(c.treat_mean)).collect());
    push_if("First-stage F-statistic", columns.iter().map(|c| num(c.first_stage_f)).collect());
    push_if(
        "Hansen J test (p-value)",
        columns
            .iter()
            .map(|c| match c.hansen_p {
                None => Cell::Empty,
                Some(None) => Cell::Text("n/a".into()),
                Some(Some(p)) => Cell::number(p, 3),
            })
            .collect(),
    );
    for label in &layout.check_rows {
        footer.push(Row::new(label.clone(), vec![Cell::Check; columns.len()]));
    }
    RenderedTable {
        title: layout.title.clone(),
        headers,
        body,
        footer,
        notes: layout.notes.clone(),
        legend: true,
    }
}
