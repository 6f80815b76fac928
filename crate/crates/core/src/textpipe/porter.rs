//! The Porter (1980) suffix-stripping stemmer, as originally published.
//!
//! Two details follow the published algorithm rather than later reference
//! code: step 2 maps `abli -> able` (not `bli -> ble`) and has no `logi`
//! rule, and words of one or two letters are not special-cased.
//!
//! Any character other than `a e i o u` (and `y` after a vowel) is treated as
//! a consonant, so digits and non-ASCII letters pass through unchanged.

/// Returns the Porter stem of a lower-case word.
pub fn stem(word: &str) -> String {
    let mut w = Word {
        chars: word.chars().collect(),
    };
    w.step1a();
    w.step1b();
    w.step1c();
    w.step2();
    w.step3();
    w.step4();
    w.step5a();
    w.step5b();
    w.chars.into_iter().collect()
}

/// A suffix rule: `(suffix, replacement)`, applied when the condition on the
/// remaining stem holds.
type Rule = (&'static str, &'static str);

enum Cond {
    MeasureAbove(usize),
    MeasureAboveAndSt,
}

struct Word {
    chars: Vec<char>,
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

/// Consonant flags for a char slice; `y` is a consonant at the start or after a vowel.
fn consonant_flags(s: &[char]) -> Vec<bool> {
    let mut flags: Vec<bool> = Vec::with_capacity(s.len());
    for (i, &c) in s.iter().enumerate() {
        let cons = if is_vowel(c) {
            false
        } else if c == 'y' {
            i == 0 || !flags[i - 1]
        } else {
            true
        };
        flags.push(cons);
    }
    flags
}

/// The measure `m` in `[C](VC){m}[V]`.
fn measure(s: &[char]) -> usize {
    let flags = consonant_flags(s);
    flags.windows(2).filter(|w| !w[0] && w[1]).count()
}

fn contains_vowel(s: &[char]) -> bool {
    consonant_flags(s).iter().any(|&c| !c)
}

fn ends_double_consonant(s: &[char]) -> bool {
    let n = s.len();
    n >= 2 && s[n - 1] == s[n - 2] && *consonant_flags(s).last().unwrap()
}

/// `*o`: ends consonant-vowel-consonant, the last not `w`, `x` or `y`.
fn ends_cvc(s: &[char]) -> bool {
    let n = s.len();
    if n < 3 {
        return false;
    }
    let flags = consonant_flags(s);
    flags[n - 3] && !flags[n - 2] && flags[n - 1] && !matches!(s[n - 1], 'w' | 'x' | 'y')
}

impl Word {
    fn ends_with(&self, suffix: &str) -> bool {
        let n = suffix.chars().count();
        n <= self.chars.len() && self.chars[self.chars.len() - n..].iter().copied().eq(suffix.chars())
    }

    fn stem_len(&self, suffix: &str) -> usize {
        self.chars.len() - suffix.chars().count()
    }

    fn replace(&mut self, suffix: &str, replacement: &str) {
        let keep = self.stem_len(suffix);
        self.chars.truncate(keep);
        self.chars.extend(replacement.chars());
    }

    /// Applies the first rule whose suffix matches; later rules are not tried
    /// even when the condition fails.
    fn apply_first(&mut self, rules: &[Rule], cond: Cond) {
        for &(suffix, replacement) in rules {
            if self.ends_with(suffix) {
                let stem = &self.chars[..self.stem_len(suffix)];
                let ok = match cond {
                    Cond::MeasureAbove(min) => measure(stem) > min,
                    Cond::MeasureAboveAndSt => {
                        measure(stem) > 1 && matches!(stem.last(), Some('s' | 't'))
                    }
                };
                if ok {
                    self.replace(suffix, replacement);
                }
                return;
            }
        }
    }

    fn step1a(&mut self) {
        for (suffix, replacement) in [("sses", "ss"), ("ies", "i"), ("ss", "ss"), ("s", "")] {
            if self.ends_with(suffix) {
                self.replace(suffix, replacement);
                return;
            }
        }
    }

    fn step1b(&mut self) {
        if self.ends_with("eed") {
            if measure(&self.chars[..self.stem_len("eed")]) > 0 {
                self.replace("eed", "ee");
            }
            return;
        }
        let mut stripped = false;
        for suffix in ["ed", "ing"] {
            if self.ends_with(suffix) && contains_vowel(&self.chars[..self.stem_len(suffix)]) {
                self.replace(suffix, "");
                stripped = true;
                break;
            }
        }
        if !stripped {
            return;
        }
        for (suffix, replacement) in [("at", "ate"), ("bl", "ble"), ("iz", "ize")] {
            if self.ends_with(suffix) {
                self.replace(suffix, replacement);
                return;
            }
        }
        if ends_double_consonant(&self.chars) {
            if !matches!(self.chars.last(), Some('l' | 's' | 'z')) {
                self.chars.pop();
            }
            return;
        }
        if measure(&self.chars) == 1 && ends_cvc(&self.chars) {
            self.chars.push('e');
        }
    }

    fn step1c(&mut self) {
        if self.ends_with("y") && contains_vowel(&self.chars[..self.chars.len() - 1]) {
            self.replace("y", "i");
        }
    }

    fn step2(&mut self) {
        const RULES: &[Rule] = &[
            ("ational", "ate"),
            ("tional", "tion"),
            ("enci", "ence"),
            ("anci", "ance"),
            ("izer", "ize"),
            ("abli", "able"),
            ("alli", "al"),
            ("entli", "ent"),
            ("eli", "e"),
            ("ousli", "ous"),
            ("ization", "ize"),
            ("ation", "ate"),
            ("ator", "ate"),
            ("alism", "al"),
            ("iveness", "ive"),
            ("fulness", "ful"),
            ("ousness", "ous"),
            ("aliti", "al"),
            ("iviti", "ive"),
            ("biliti", "ble"),
        ];
        self.apply_first(RULES, Cond::MeasureAbove(0));
    }

    fn step3(&mut self) {
        const RULES: &[Rule] = &[
            ("icate", "ic"),
            ("ative", ""),
            ("alize", "al"),
            ("iciti", "ic"),
            ("ical", "ic"),
            ("ful", ""),
            ("ness", ""),
        ];
        self.apply_first(RULES, Cond::MeasureAbove(0));
    }

    fn step4(&mut self) {
        const BEFORE_ION: &[Rule] = &[
            ("al", ""),
            ("ance", ""),
            ("ence", ""),
            ("er", ""),
            ("ic", ""),
            ("able", ""),
            ("ible", ""),
            ("ant", ""),
            ("ement", ""),
            ("ment", ""),
            ("ent", ""),
        ];
        const AFTER_ION: &[Rule] = &[
            ("ou", ""),
            ("ism", ""),
            ("ate", ""),
            ("iti", ""),
            ("ous", ""),
            ("ive", ""),
            ("ize", ""),
        ];
        if BEFORE_ION.iter().any(|(s, _)| self.ends_with(s)) {
            self.apply_first(BEFORE_ION, Cond::MeasureAbove(1));
        } else if self.ends_with("ion") {
            self.apply_first(&[("ion", "")], Cond::MeasureAboveAndSt);
        } else {
            self.apply_first(AFTER_ION, Cond::MeasureAbove(1));
        }
    }

    fn step5a(&mut self) {
        if self.ends_with("e") {
            let stem = &self.chars[..self.chars.len() - 1];
            let m = measure(stem);
            if m > 1 || (m == 1 && !ends_cvc(stem)) {
                self.chars.pop();
            }
        }
    }

    fn step5b(&mut self) {
        if self.ends_with("ll") && measure(&self.chars[..self.chars.len() - 1]) > 1 {
            self.chars.pop();
        }
    }
}
