//! Set-wise adaptive composition: an analyst preregisters a multiset of
//! privacy parameters and consumes them in any order, without replacement.
//! The global bound depends only on the registered multiset.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum PrivacyClass {
    PureDP { eps: f64 },
    BR { alpha: f64 },
    CDP { mu: f64, tau: f64 },
    ZCDP { delta: f64, xi: f64, rho: f64 },
}

impl PrivacyClass {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PrivacyClass::PureDP { eps } => eps > 0.0 && eps.is_finite(),
            PrivacyClass::BR { alpha } => alpha > 0.0 && alpha.is_finite(),
            PrivacyClass::CDP { mu, tau } => mu >= 0.0 && mu.is_finite() && tau > 0.0 && tau.is_finite(),
            PrivacyClass::ZCDP { delta, xi, rho } => {
                (0.0..1.0).contains(&delta) && xi.is_finite() && rho >= 0.0 && rho.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(domain(format!("invalid privacy parameters {self:?}")))
        }
    }

    fn canonical_key(&self) -> (u8, [i64; 3]) {
        let r = |x: f64| (x * 1e12).round() as i64;
        match *self {
            PrivacyClass::PureDP { eps } => (0, [r(eps), 0, 0]),
            PrivacyClass::BR { alpha } => (1, [r(alpha), 0, 0]),
            PrivacyClass::CDP { mu, tau } => (2, [r(mu), r(tau), 0]),
            PrivacyClass::ZCDP { delta, xi, rho } => (3, [r(delta), r(xi), r(rho)]),
        }
    }
}

/// Mean and subgaussian parameter of a mechanism's privacy loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdpPair {
    pub mu: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZcdpParams {
    pub delta: f64,
    pub xi: f64,
    pub rho: f64,
}

/// Upper bound on the expected privacy loss of an alpha-BR mechanism.
pub fn br_mean_loss(alpha: f64) -> f64 {
    // u - 1 - ln u with u = alpha / (e^alpha - 1)
    let w = alpha / alpha.exp_m1() - 1.0;
    w - w.ln_1p()
}

/// Expected privacy loss bound of a pure eps-DP mechanism.
pub fn pure_dp_mean_loss(eps: f64) -> f64 {
    eps * (eps / 2.0).tanh()
}

pub fn convert_to_cdp(c: &PrivacyClass) -> Result<CdpPair> {
    c.validate()?;
    match *c {
        PrivacyClass::PureDP { eps } => Ok(CdpPair { mu: pure_dp_mean_loss(eps), tau: eps }),
        PrivacyClass::BR { alpha } => Ok(CdpPair { mu: br_mean_loss(alpha), tau: alpha / 2.0 }),
        PrivacyClass::CDP { mu, tau } => Ok(CdpPair { mu, tau }),
        PrivacyClass::ZCDP { .. } => Err(Error::Contract(
            "zCDP parameters have no CDP conversion; use the zCDP bound".into(),
        )),
    }
}

pub fn convert_to_zcdp(c: &PrivacyClass) -> Result<ZcdpParams> {
    c.validate()?;
    Ok(match *c {
        PrivacyClass::PureDP { eps } => ZcdpParams { delta: 0.0, xi: 0.0, rho: eps * eps / 2.0 },
        PrivacyClass::BR { alpha } => {
            let rho = alpha * alpha / 8.0;
            ZcdpParams { delta: 0.0, xi: br_mean_loss(alpha) - rho, rho }
        }
        PrivacyClass::CDP { mu, tau } => {
            let rho = tau * tau / 2.0;
            ZcdpParams { delta: 0.0, xi: mu - rho, rho }
        }
        PrivacyClass::ZCDP { delta, xi, rho } => ZcdpParams { delta, xi, rho },
    })
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Sums {
    cdp_mu: f64,
    cdp_tau2: f64,
    cdp_ok: bool,
    z_xi_rho: f64,
    z_rho: f64,
    z_delta: f64,
}

impl Sums {
    fn of(classes: &[PrivacyClass]) -> Result<Sums> {
        let mut s = Sums { cdp_ok: true, ..Sums::default() };
        for c in classes {
            match convert_to_cdp(c) {
                Ok(p) => {
                    s.cdp_mu += p.mu;
                    s.cdp_tau2 += p.tau * p.tau;
                }
                Err(Error::Contract(_)) => s.cdp_ok = false,
                Err(e) => return Err(e),
            }
            let z = convert_to_zcdp(c)?;
            s.z_xi_rho += z.xi + z.rho;
            s.z_rho += z.rho;
            s.z_delta += z.delta;
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AccountantDoc {
    registered: Vec<PrivacyClass>,
    consumed: Vec<PrivacyClass>,
    delta_slack: f64,
}

/// Preregistered multiset of privacy parameters with a consumption log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AccountantDoc", into = "AccountantDoc")]
pub struct SetwiseAccountant {
    registered: Vec<PrivacyClass>,
    consumed: Vec<PrivacyClass>,
    delta_slack: f64,
    sums: Sums,
}

impl TryFrom<AccountantDoc> for SetwiseAccountant {
    type Error = Error;

    fn try_from(doc: AccountantDoc) -> Result<Self> {
        let mut acc = SetwiseAccountant::new(doc.delta_slack)?;
        for c in doc.registered {
            acc.register(c)?;
        }
        for c in doc.consumed {
            acc.consume(c)?;
        }
        Ok(acc)
    }
}

impl From<SetwiseAccountant> for AccountantDoc {
    fn from(a: SetwiseAccountant) -> Self {
        AccountantDoc { registered: a.registered, consumed: a.consumed, delta_slack: a.delta_slack }
    }
}

impl SetwiseAccountant {
    pub fn new(delta_slack: f64) -> Result<Self> {
        check_delta(delta_slack)?;
        Ok(SetwiseAccountant {
            registered: Vec::new(),
            consumed: Vec::new(),
            delta_slack,
            sums: Sums { cdp_ok: true, ..Sums::default() },
        })
    }

    pub fn registered(&self) -> &[PrivacyClass] {
        &self.registered
    }

    pub fn consumed(&self) -> &[PrivacyClass] {
        &self.consumed
    }

    pub fn delta_slack(&self) -> f64 {
        self.delta_slack
    }

    /// Adds a class to the multiset. Only allowed before the first consume.
    pub fn register(&mut self, c: PrivacyClass) -> Result<()> {
        if !self.consumed.is_empty() {
            return Err(Error::State("registration is closed once consumption has begun".into()));
        }
        c.validate()?;
        self.registered.push(c);
        self.sums = Sums::of(&self.registered)?;
        Ok(())
    }

    fn remaining_count(&self, c: &PrivacyClass) -> usize {
        let key = c.canonical_key();
        let reg = self.registered.iter().filter(|r| r.canonical_key() == key).count();
        let used = self.consumed.iter().filter(|r| r.canonical_key() == key).count();
        reg - used
    }

    /// Removes one matching instance from the remaining multiset.
    pub fn consume(&mut self, c: PrivacyClass) -> Result<()> {
        if self.remaining_count(&c) == 0 {
            return Err(Error::Budget(format!("{c:?} is not among the remaining registered parameters")));
        }
        self.consumed.push(c);
        Ok(())
    }

    /// Registered classes not yet consumed, in registration order.
    pub fn remaining(&self) -> Vec<PrivacyClass> {
        let mut used: Vec<(u8, [i64; 3])> = self.consumed.iter().map(PrivacyClass::canonical_key).collect();
        self.registered
            .iter()
            .filter(|c| {
                let key = c.canonical_key();
                if let Some(pos) = used.iter().position(|u| *u == key) {
                    used.swap_remove(pos);
                    false
                } else {
                    true
                }
            })
            .copied()
            .collect()
    }

    /// `sum mu_i + sqrt(2 sum tau_i^2 ln(1/delta))` over the registered set.
    pub fn global_bound_cdp(&self, delta: f64) -> Result<f64> {
        check_delta(delta)?;
        if !self.sums.cdp_ok {
            return Err(Error::Contract("registered set contains zCDP parameters; use the zCDP bound".into()));
        }
        Ok(self.sums.cdp_mu + (2.0 * self.sums.cdp_tau2 * (1.0 / delta).ln()).sqrt())
    }

    /// `(sum(xi_i + rho_i) + 2 sqrt(sum rho_i ln(1/delta)), delta + sum delta_i)`.
    pub fn global_bound_zcdp(&self, delta: f64) -> Result<(f64, f64)> {
        check_delta(delta)?;
        let eps_g = self.sums.z_xi_rho + 2.0 * (self.sums.z_rho * (1.0 / delta).ln()).sqrt();
        Ok((eps_g, delta + self.sums.z_delta))
    }
}

/// Homogeneous registered set: `m_dp` copies of PureDP(eps), `m_br` of
/// BR(alpha), `m_cdp` of CDP(mu, tau).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousSet {
    pub m_dp: u64,
    pub eps: f64,
    pub m_br: u64,
    pub alpha: f64,
    pub m_cdp: u64,
    pub mu: f64,
    pub tau: f64,
}

/// Closed-form global ε for a [`HomogeneousSet`].
pub fn homogeneous_setwise_eps(set: &HomogeneousSet, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let (md, mb, mc) = (set.m_dp as f64, set.m_br as f64, set.m_cdp as f64);
    let mut mean = 0.0;
    let mut var = 0.0;
    if set.m_dp > 0 {
        PrivacyClass::PureDP { eps: set.eps }.validate()?;
        let e = set.eps;
        mean += md * e * e.exp_m1() / (e.exp() + 1.0);
        var += md * e * e;
    }
    if set.m_br > 0 {
        PrivacyClass::BR { alpha: set.alpha }.validate()?;
        let a = set.alpha;
        let u = a / a.exp_m1();
        mean += mb * (u - 1.0 - u.ln());
        var += mb / 4.0 * a * a;
    }
    if set.m_cdp > 0 {
        PrivacyClass::CDP { mu: set.mu, tau: set.tau }.validate()?;
        mean += mc * set.mu;
        var += mc * set.tau * set.tau;
    }
    Ok(mean + (2.0 * var * (1.0 / delta).ln()).sqrt())
}
