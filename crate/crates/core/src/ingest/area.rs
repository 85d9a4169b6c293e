/// Postal code and name for the 50 states, DC and Puerto Rico.
pub const STATES: [(&str, &str); 52] = [
    ("AL", "Alabama"),
    ("AK", "Alaska"),
    ("AZ", "Arizona"),
    ("AR", "Arkansas"),
    ("CA", "California"),
    ("CO", "Colorado"),
    ("CT", "Connecticut"),
    ("DE", "Delaware"),
    ("DC", "District of Columbia"),
    ("FL", "Florida"),
    ("GA", "Georgia"),
    ("HI", "Hawaii"),
    ("ID", "Idaho"),
    ("IL", "Illinois"),
    ("IN", "Indiana"),
    ("IA", "Iowa"),
    ("KS", "Kansas"),
    ("KY", "Kentucky"),
    ("LA", "Louisiana"),
    ("ME", "Maine"),
    ("MD", "Maryland"),
    ("MA", "Massachusetts"),
    ("MI", "Michigan"),
    ("MN", "Minnesota"),
    ("MS", "Mississippi"),
    ("MO", "Missouri"),
    ("MT", "Montana"),
    ("NE", "Nebraska"),
    ("NV", "Nevada"),
    ("NH", "New Hampshire"),
    ("NJ", "New Jersey"),
    ("NM", "New Mexico"),
    ("NY", "New York"),
    ("NC", "North Carolina"),
    ("ND", "North Dakota"),
    ("OH", "Ohio"),
    ("OK", "Oklahoma"),
    ("OR", "Oregon"),
    ("PA", "Pennsylvania"),
    ("PR", "Puerto Rico"),
    ("RI", "Rhode Island"),
    ("SC", "South Carolina"),
    ("SD", "South Dakota"),
    ("TN", "Tennessee"),
    ("TX", "Texas"),
    ("UT", "Utah"),
    ("VT", "Vermont"),
    ("VA", "Virginia"),
    ("WA", "Washington"),
    ("WV", "West Virginia"),
    ("WI", "Wisconsin"),
    ("WY", "Wyoming"),
];

const EXTRA_NAMES: [(&str, &str); 2] = [("DC", "Washington DC"), ("DC", "Washington D C")];

/// Two-letter code for a state given either its code or full name.
pub fn state_code(text: &str) -> Option<&'static str> {
    let t = text.trim();
    STATES
        .iter()
        .find(|(code, name)| code.eq_ignore_ascii_case(t) || name.eq_ignore_ascii_case(t))
        .map(|(code, _)| *code)
}

/// Extracts the states named in a free-text "Area Affected" value, in order of
/// first mention and without duplicates.
///
/// Full state names match case-insensitively, longest first (so "West
/// Virginia" never also yields VA). Two-letter codes only match as
/// upper-case standalone tokens, which keeps words like "or" and "in" out.
pub fn resolve_states(area: &str) -> Vec<&'static str> {
    let cleaned: String = area
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let tokens: Vec<&str> = cleaned.split_whitespace().collect();

    let mut names: Vec<(&'static str, Vec<String>)> = STATES
        .iter()
        .chain(EXTRA_NAMES.iter())
        .map(|(code, name)| {
            (
                *code,
                name.split_whitespace().map(|w| w.to_lowercase()).collect(),
            )
        })
        .collect();
    names.sort_by(|a, b| b.1.len().cmp(&a.1.len()));

    let mut found: Vec<&'static str> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let hit = names.iter().find(|(_, words)| {
            i + words.len() <= tokens.len()
                && words
                    .iter()
                    .zip(&tokens[i..])
                    .all(|(w, t)| t.to_lowercase() == *w)
        });
        let (code, advance) = match hit {
            Some((code, words)) => (Some(*code), words.len()),
            None => {
                let tok = tokens[i];
                let code = (tok.len() == 2 && tok.chars().all(|c| c.is_ascii_uppercase()))
                    .then(|| STATES.iter().find(|(c, _)| *c == tok).map(|(c, _)| *c))
                    .flatten();
                (code, 1)
            }
        };
        if let Some(code) = code {
            if !found.contains(&code) {
                found.push(code);
            }
        }
        i += advance;
    }
    found
}
