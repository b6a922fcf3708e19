//! Shared test fixture: a deterministic 32-example code-mixed corpus whose
//! classes are separable by vocabulary, with noise tokens sprinkled in to
//! exercise the cleaning pipeline.

/// Class-exclusive word pools, (text, tag).
const POSITIVE: &[(&str, &str)] = &[
    ("accha", "Hin"),
    ("badhiya", "Hin"),
    ("mast", "Hin"),
    ("great", "Eng"),
    ("love", "Eng"),
    ("happy", "Eng"),
    ("#win", "O"),
];
const NEGATIVE: &[(&str, &str)] = &[
    ("bura", "Hin"),
    ("bekar", "Hin"),
    ("ganda", "Hin"),
    ("awful", "Eng"),
    ("hate", "Eng"),
    ("sad", "Eng"),
    ("#fail", "O"),
];
const NEUTRAL: &[(&str, &str)] = &[
    ("theek", "Hin"),
    ("aaj", "Hin"),
    ("khabar", "Hin"),
    ("news", "Eng"),
    ("update", "Eng"),
    ("report", "Eng"),
    ("#info", "O"),
];
const FILLER: &[(&str, &str)] = &[
    ("hai", "Hin"),
    ("the", "Eng"),
    ("match", "Eng"),
    ("yaar", "Hin"),
];
const NOISE: &[(&str, &str)] = &[
    ("@user", "O"),
    ("http://t.co/x", "O"),
    ("😀", "O"),
    (":)", "O"),
];

pub const FIXTURE_SIZE: usize = 32;

/// The 32-example corpus in canonical file form. Deterministic; classes
/// cycle negative, neutral, positive.
pub fn fixture_corpus() -> String {
    let mut out = String::new();
    for i in 0..FIXTURE_SIZE {
        let class = i % 3;
        let pool = match class {
            0 => NEGATIVE,
            1 => NEUTRAL,
            _ => POSITIVE,
        };
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!(
            "meta\tt{i:02}\t{}\n",
            ["negative", "neutral", "positive"][class]
        ));
        let mut tokens: Vec<(&str, &str)> = Vec::new();
        tokens.push(pool[i % pool.len()]);
        tokens.push(FILLER[i % FILLER.len()]);
        tokens.push(pool[(i / 3 + 1) % pool.len()]);
        if i % 4 == 0 {
            tokens.push(NOISE[(i / 4) % NOISE.len()]);
        }
        if i % 5 == 0 {
            tokens.push(pool[(i / 5 + 2) % pool.len()]);
        }
        for (text, tag) in tokens {
            out.push_str(text);
            out.push('\t');
            out.push_str(tag);
            out.push('\n');
        }
    }
    out
}

/// A three-example unlabeled corpus over the fixture vocabulary.
pub fn unlabeled_corpus() -> String {
    "meta\tu0\ngreat\tEng\nmatch\tEng\n\nmeta\tu1\nbura\tHin\nhai\tHin\n\nmeta\tu2\nnews\tEng\naaj\tHin\n".to_string()
}
