use super::AdversarialError;

/// Outcome of attacking and defending one test image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub image_id: usize,
    pub eps: f64,
    /// SGLD steps per training chain of the defending energy model.
    pub n_train_sgld: usize,
    pub clean_pred: usize,
    pub adv_pred: usize,
    pub post_pred: usize,
    /// Largest averaged-logit likelihood after purification.
    pub confidence: f64,
    pub label: usize,
}

impl ImageRecord {
    pub fn correct_clean(&self) -> bool {
        self.clean_pred == self.label
    }

    pub fn correct_adv(&self) -> bool {
        self.adv_pred == self.label
    }

    pub fn correct_post(&self) -> bool {
        self.post_pred == self.label
    }
}

/// Per-image attack records with their aggregate accuracies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttackReport {
    pub records: Vec<ImageRecord>,
}

impl AttackReport {
    /// The trailing `label` column lets every aggregate be recomputed from
    /// the file alone.
    pub const HEADER: &'static str =
        "image_id,eps,n_train_sgld,clean_pred,adv_pred,post_pred,confidence,correct_clean,correct_post,label";

    fn mean(&self, f: impl Fn(&ImageRecord) -> bool) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| f(r)).count() as f64 / self.records.len() as f64
    }

    pub fn clean_accuracy(&self) -> f64 {
        self.mean(ImageRecord::correct_clean)
    }

    pub fn adv_accuracy(&self) -> f64 {
        self.mean(ImageRecord::correct_adv)
    }

    pub fn post_accuracy(&self) -> f64 {
        self.mean(ImageRecord::correct_post)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.image_id,
                r.eps,
                r.n_train_sgld,
                r.clean_pred,
                r.adv_pred,
                r.post_pred,
                r.confidence,
                u8::from(r.correct_clean()),
                u8::from(r.correct_post()),
                r.label
            ));
        }
        out
    }

    /// Parses [`AttackReport::to_csv`] output, checking the stored
    /// correctness flags against the predictions.
    pub fn from_csv(text: &str) -> Result<Self, AdversarialError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == Self::HEADER => {}
            _ => {
                return Err(AdversarialError::Parse {
                    line: 1,
                    reason: format!("expected header {}", Self::HEADER),
                })
            }
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let line_no = i + 1;
            let err = |reason: String| AdversarialError::Parse { line: line_no, reason };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 10 {
                return Err(err(format!("expected 10 columns, found {}", cols.len())));
            }
            let int = |k: usize| cols[k].parse::<usize>().map_err(|e| err(format!("column {k}: {e}")));
            let real = |k: usize| cols[k].parse::<f64>().map_err(|e| err(format!("column {k}: {e}")));
            let r = ImageRecord {
                image_id: int(0)?,
                eps: real(1)?,
                n_train_sgld: int(2)?,
                clean_pred: int(3)?,
                adv_pred: int(4)?,
                post_pred: int(5)?,
                confidence: real(6)?,
                label: int(9)?,
            };
            if int(7)? != usize::from(r.correct_clean()) || int(8)? != usize::from(r.correct_post()) {
                return Err(err("correctness flags disagree with predictions".into()));
            }
            records.push(r);
        }
        Ok(Self { records })
    }
}
