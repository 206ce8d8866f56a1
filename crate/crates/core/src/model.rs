//! Network parameters and storage-code profiles.
//!
//! A [`StorageCode`] only carries the quantities that drive communication
//! cost (storage per node, repair transfer, access counts). No encoding or
//! decoding is modelled.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative and finite, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("storage budget multiplier must be at least 1, got {0}")]
    BudgetBelowOne(f64),
    #[error("rho_bs < rho_d2d ({rho_bs} < {rho_d2d})")]
    BsCheaperThanD2d { rho_bs: f64, rho_d2d: f64 },
    #[error("invalid code parameters: {0}")]
    InvalidCode(String),
}

fn positive(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ModelError::NotPositive { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(ModelError::Negative { name, value })
    }
}

/// Cell-level constants.
///
/// Arrivals and departures share one churn rate: the aggregate arrival rate
/// is `N·churn_rate` and each node leaves at `churn_rate`, which keeps the
/// mean population at `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetworkParams {
    nodes: f64,
    churn_rate: f64,
    request_rate: f64,
    file_size: f64,
    storage_budget: f64,
    rho_bs: f64,
    rho_d2d: f64,
}

impl NetworkParams {
    pub fn new(
        nodes: f64,
        churn_rate: f64,
        request_rate: f64,
        file_size: f64,
        storage_budget: f64,
        rho_bs: f64,
        rho_d2d: f64,
    ) -> Result<Self, ModelError> {
        let params = Self {
            nodes: positive("nodes", nodes)?,
            churn_rate: non_negative("churn_rate", churn_rate)?,
            request_rate: non_negative("request_rate", request_rate)?,
            file_size: positive("file_size", file_size)?,
            storage_budget: positive("storage_budget", storage_budget)?,
            rho_bs: positive("rho_bs", rho_bs)?,
            rho_d2d: positive("rho_d2d", rho_d2d)?,
        };
        if storage_budget < 1.0 {
            return Err(ModelError::BudgetBelowOne(storage_budget));
        }
        if rho_bs < rho_d2d {
            return Err(ModelError::BsCheaperThanD2d { rho_bs, rho_d2d });
        }
        Ok(params)
    }

    /// Same cell with a different BS cost per bit.
    pub fn with_rho_bs(self, rho_bs: f64) -> Result<Self, ModelError> {
        Self::new(
            self.nodes,
            self.churn_rate,
            self.request_rate,
            self.file_size,
            self.storage_budget,
            rho_bs,
            self.rho_d2d,
        )
    }

    pub fn with_churn_rate(self, churn_rate: f64) -> Result<Self, ModelError> {
        Self::new(
            self.nodes,
            churn_rate,
            self.request_rate,
            self.file_size,
            self.storage_budget,
            self.rho_bs,
            self.rho_d2d,
        )
    }

    pub fn with_request_rate(self, request_rate: f64) -> Result<Self, ModelError> {
        Self::new(
            self.nodes,
            self.churn_rate,
            request_rate,
            self.file_size,
            self.storage_budget,
            self.rho_bs,
            self.rho_d2d,
        )
    }

    /// Expected number of nodes in the cell, `N`.
    pub fn nodes(&self) -> f64 {
        self.nodes
    }

    pub fn churn_rate(&self) -> f64 {
        self.churn_rate
    }

    /// Per-node arrival-rate factor `λ`; the aggregate arrival rate is `N·λ`.
    pub fn arrival_rate(&self) -> f64 {
        self.churn_rate
    }

    /// Per-node departure rate `μ`.
    pub fn departure_rate(&self) -> f64 {
        self.churn_rate
    }

    /// Per-node request rate `ω`.
    pub fn request_rate(&self) -> f64 {
        self.request_rate
    }

    /// File size `M` in bits.
    pub fn file_size(&self) -> f64 {
        self.file_size
    }

    /// Storage budget multiplier `Γ`.
    pub fn storage_budget(&self) -> f64 {
        self.storage_budget
    }

    pub fn rho_bs(&self) -> f64 {
        self.rho_bs
    }

    pub fn rho_d2d(&self) -> f64 {
        self.rho_d2d
    }

    /// Cost ratio `ρ_BS / ρ_D2D`.
    pub fn rho(&self) -> f64 {
        self.rho_bs / self.rho_d2d
    }

    /// Aggregate request rate `N·ω`.
    pub fn aggregate_request_rate(&self) -> f64 {
        self.nodes * self.request_rate
    }

    /// Cost rate of serving every request from the BS, `N·ω·ρ_BS`.
    pub fn bs_only_cost(&self) -> f64 {
        self.aggregate_request_rate() * self.rho_bs
    }
}

impl Default for NetworkParams {
    /// The reference cell: `N = 100`, `μ = λ = 50`, `ω = 0.5`, `M = 1`,
    /// `Γ = 5`, `ρ_BS = 200`, `ρ_D2D = 1`.
    fn default() -> Self {
        Self {
            nodes: 100.0,
            churn_rate: 50.0,
            request_rate: 0.5,
            file_size: 1.0,
            storage_budget: 5.0,
            rho_bs: 200.0,
            rho_d2d: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeFamily {
    Mds,
    Replication,
    Msr,
    Mbr,
}

impl fmt::Display for CodeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodeFamily::Mds => "MDS",
            CodeFamily::Replication => "replication",
            CodeFamily::Msr => "MSR",
            CodeFamily::Mbr => "MBR",
        })
    }
}

/// Storage and repair profile of one code.
///
/// `k` is real-valued because MBR codes have a fractional dimension
/// `k = h(2r − h + 1)/(2r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StorageCode {
    family: CodeFamily,
    n: u32,
    k: f64,
    h: u32,
    r: u32,
    file_size: f64,
    alpha: f64,
    beta: f64,
    gamma_d2d: f64,
    gamma_bs: f64,
}

impl StorageCode {
    /// `(n, k)` MDS code: download and repair both contact `k` nodes and
    /// repairing one node moves a whole file.
    pub fn mds(n: u32, k: u32, file_size: f64) -> Result<Self, ModelError> {
        let file_size = positive("file_size", file_size)?;
        if k == 0 || n == 0 {
            return Err(ModelError::InvalidCode(format!(
                "MDS needs n, k >= 1 (n={n}, k={k})"
            )));
        }
        if k > n {
            return Err(ModelError::InvalidCode(format!(
                "MDS needs k <= n (n={n}, k={k})"
            )));
        }
        let alpha = file_size / f64::from(k);
        Ok(Self {
            family: CodeFamily::Mds,
            n,
            k: f64::from(k),
            h: k,
            r: k,
            file_size,
            alpha,
            beta: alpha,
            gamma_d2d: f64::from(k) * alpha,
            gamma_bs: alpha,
        })
    }

    /// `n`-replication: every storage node holds the whole file.
    pub fn replication(n: u32, file_size: f64) -> Result<Self, ModelError> {
        let file_size = positive("file_size", file_size)?;
        if n == 0 {
            return Err(ModelError::InvalidCode("replication needs n >= 1".into()));
        }
        Ok(Self {
            family: CodeFamily::Replication,
            n,
            k: 1.0,
            h: 1,
            r: 1,
            file_size,
            alpha: file_size,
            beta: file_size,
            gamma_d2d: file_size,
            gamma_bs: file_size,
        })
    }

    /// Minimum-storage regenerating code with repair access `r`.
    pub fn msr(n: u32, k: u32, r: u32, file_size: f64) -> Result<Self, ModelError> {
        let file_size = positive("file_size", file_size)?;
        if k == 0 || k > r || r + 1 > n {
            return Err(ModelError::InvalidCode(format!(
                "MSR needs 1 <= k <= r <= n-1 (n={n}, k={k}, r={r})"
            )));
        }
        let h = k;
        let alpha = file_size / f64::from(k);
        let beta = file_size / (f64::from(h) * f64::from(r - h + 1));
        Ok(Self {
            family: CodeFamily::Msr,
            n,
            k: f64::from(k),
            h,
            r,
            file_size,
            alpha,
            beta,
            gamma_d2d: f64::from(r) * beta,
            gamma_bs: alpha,
        })
    }

    /// Minimum-bandwidth regenerating code with download access `h` and
    /// repair access `r`. Storage per node equals the D2D repair bandwidth.
    pub fn mbr(n: u32, h: u32, r: u32, file_size: f64) -> Result<Self, ModelError> {
        let file_size = positive("file_size", file_size)?;
        if h == 0 || r < h || r >= n {
            return Err(ModelError::InvalidCode(format!(
                "MBR needs 1 <= h <= r <= n-1 (n={n}, h={h}, r={r})"
            )));
        }
        let (hf, rf) = (f64::from(h), f64::from(r));
        let k = hf * (2.0 * rf - hf + 1.0) / (2.0 * rf);
        let beta = (file_size / hf) * 2.0 / (2.0 * rf - hf + 1.0);
        let gamma_d2d = rf * beta;
        Ok(Self {
            family: CodeFamily::Mbr,
            n,
            k,
            h,
            r,
            file_size,
            alpha: gamma_d2d,
            beta,
            gamma_d2d,
            gamma_bs: gamma_d2d,
        })
    }

    pub fn family(&self) -> CodeFamily {
        self.family
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Download access: live storage nodes needed for a D2D download.
    pub fn h(&self) -> u32 {
        self.h
    }

    /// Repair access: live storage nodes needed for a D2D repair.
    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn file_size(&self) -> f64 {
        self.file_size
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma_d2d(&self) -> f64 {
        self.gamma_d2d
    }

    pub fn gamma_bs(&self) -> f64 {
        self.gamma_bs
    }

    /// Code rate `k/n`.
    pub fn rate(&self) -> f64 {
        self.k / f64::from(self.n)
    }

    /// Bits moved by one D2D download, `h·α`.
    pub fn download_bits(&self) -> f64 {
        f64::from(self.h) * self.alpha
    }

    /// Short label in `[n,h,r]` notation, e.g. `MDS[10,2,2]`.
    pub fn label(&self) -> String {
        match self.family {
            CodeFamily::Replication => format!("{}-replication", self.n),
            family => format!("{family}[{},{},{}]", self.n, self.h, self.r),
        }
    }
}

impl fmt::Display for StorageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub constraint: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

// Relative slack for the storage budget so that codes sitting exactly on
// n·α = ΓM survive rounding in α = M/k.
const BUDGET_SLACK: f64 = 1e-12;

/// Checks a code against the cell's storage budget and the access-range
/// rules. Failures are reported, never thrown.
pub fn validate(code: &StorageCode, params: &NetworkParams) -> ValidationReport {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    let mut fail = |constraint: &'static str, detail: String| {
        violations.push(Violation { constraint, detail });
    };

    let m = params.file_size();
    let budget = params.storage_budget() * m;
    let n = f64::from(code.n);

    if (code.file_size - m).abs() > BUDGET_SLACK * m {
        fail(
            "file_size",
            format!("code built for M={} but cell has M={m}", code.file_size),
        );
    }
    let stored = n * code.alpha;
    if stored > budget * (1.0 + BUDGET_SLACK) {
        fail(
            "storage_budget",
            format!("n*alpha = {stored} exceeds Gamma*M = {budget}"),
        );
    }
    let min_rate = 1.0 / params.storage_budget();
    if code.rate() < min_rate * (1.0 - BUDGET_SLACK) {
        fail(
            "code_rate",
            format!("rate {} below 1/Gamma = {min_rate}", code.rate()),
        );
    }
    if code.beta > code.alpha * (1.0 + BUDGET_SLACK) {
        fail(
            "beta_le_alpha",
            format!("beta = {} exceeds alpha = {}", code.beta, code.alpha),
        );
    }
    if code.h > code.n {
        fail(
            "download_access",
            format!("h = {} > n = {}", code.h, code.n),
        );
    }
    match code.family {
        CodeFamily::Mbr => {
            if code.h > code.r {
                fail(
                    "download_access",
                    format!("h = {} > r = {}", code.h, code.r),
                );
            }
        }
        _ => {
            if f64::from(code.h) < code.k.ceil() {
                fail(
                    "download_access",
                    format!("h = {} < ceil(k) = {}", code.h, code.k.ceil()),
                );
            }
        }
    }
    if code.r + 1 > code.n {
        fail(
            "repair_access",
            format!(
                "r = {} exceeds n - 1 = {}",
                code.r,
                code.n.saturating_sub(1)
            ),
        );
    }
    if n > params.nodes() / 5.0 {
        warnings.push(format!(
            "n = {} is not much smaller than N = {} (n > N/5)",
            code.n,
            params.nodes()
        ));
    }

    ValidationReport {
        feasible: violations.is_empty(),
        violations,
        warnings,
    }
}

/// The six codes of the reference experiments: MDS[10,2,2], MSR[10,2,5],
/// MSR[10,2,9], MBR[10,3,5], MBR[10,3,9] and 5-replication.
pub fn reference_codes(file_size: f64) -> Vec<StorageCode> {
    vec![
        StorageCode::mds(10, 2, file_size).expect("valid MDS"),
        StorageCode::msr(10, 2, 5, file_size).expect("valid MSR"),
        StorageCode::msr(10, 2, 9, file_size).expect("valid MSR"),
        StorageCode::mbr(10, 3, 5, file_size).expect("valid MBR"),
        StorageCode::mbr(10, 3, 9, file_size).expect("valid MBR"),
        StorageCode::replication(5, file_size).expect("valid replication"),
    ]
}
