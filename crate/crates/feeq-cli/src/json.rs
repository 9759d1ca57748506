//! Minimal JSON writer. Floats are emitted with 17 significant digits in a
//! fixed scientific form so output is byte-stable across platforms and
//! locales.

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

#[derive(Default)]
pub struct Obj {
    parts: Vec<String>,
}

impl Obj {
    pub fn new() -> Self {
        Obj::default()
    }

    pub fn num(mut self, key: &str, value: f64) -> Self {
        self.parts.push(format!("\"{key}\": {}", fmt_f64(value)));
        self
    }

    pub fn int(mut self, key: &str, value: u64) -> Self {
        self.parts.push(format!("\"{key}\": {value}"));
        self
    }

    pub fn bool(mut self, key: &str, value: bool) -> Self {
        self.parts.push(format!("\"{key}\": {value}"));
        self
    }

    pub fn str(mut self, key: &str, value: &str) -> Self {
        self.parts.push(format!("\"{key}\": \"{}\"", escape(value)));
        self
    }

    pub fn raw(mut self, key: &str, value: String) -> Self {
        self.parts.push(format!("\"{key}\": {value}"));
        self
    }

    pub fn finish(self) -> String {
        format!("{{{}}}", self.parts.join(", "))
    }
}

pub fn array(items: impl IntoIterator<Item = String>) -> String {
    format!("[{}]", items.into_iter().collect::<Vec<_>>().join(", "))
}
