#!/usr/bin/env python3
"""Generates the bundled demo backlog fixture and its labeled truth.

51 issues for project GRM: six duplicate groups of sizes 6/6/4/3/2/2
(41 true pairs in total, the group cliques) plus 28 distinct filler
issues. Texts are authored so that, at the documented 0.80 threshold
with the local trigram embedder:

  * every cross-group / filler pair scores well below the threshold
    (no false positive is reachable), and
  * the deliberately paraphrased "hard" group members score below it
    (so recall stays < 1, like a real scan).

The script recomputes all pair scores with its own double loop (not the
package's scan path), verifies those properties, and freezes the
expected detection list into expected_scan.json. Run it after editing
texts; it fails loudly instead of writing a fixture that breaks them.
"""
from __future__ import annotations

import json
import math
import sys
from datetime import datetime, timedelta, timezone
from itertools import combinations
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from backlog_groomer.embedding import local_hash_embed  # noqa: E402

THRESHOLD = 0.80
SAFETY_GAP = 0.05  # cross pairs must stay at least this far below the cut
OUT_DIR = Path(__file__).resolve().parents[1] / "src" / "backlog_groomer" / "fixtures"

# (group tag or None, summary, description)
ISSUES: list[tuple[str | None, str, str]] = [
    # --- group A: login fails after password reset (6 members, 1 hard) ----
    (
        "A",
        "Login fails after password reset",
        "After completing a password reset, signing in with the new password "
        "returns a 500 error. The session cookie is never issued and the user "
        "stays stuck on the login page.",
    ),
    (
        "A",
        "Login fails after resetting password",
        "After completing a password reset, signing in with the new password "
        "returns a 500 error. The session cookie is never issued and the user "
        "stays stuck on the login page.",
    ),
    (
        "A",
        "Signing in fails after password reset",
        "After completing a password reset, signing in with the new password "
        "returns an HTTP 500 error. The session cookie is never issued and the "
        "user stays stuck on the login page.",
    ),
    (
        "A",
        "Login broken after password reset",
        "After completing a password reset, signing in with the new password "
        "returns a 500 error. The session cookie is never issued and the "
        "account stays stuck on the login page.",
    ),
    (
        "A",
        "Password reset leads to login failure",
        "After completing a password reset, signing in with the new password "
        "returns a 500 error. The session cookie is never issued and the user "
        "remains stuck on the login page.",
    ),
    (
        "A",  # hard member: same defect, different phrasing -> expected miss
        "New credentials rejected right after reset",
        "Users who just changed their password cannot get past the sign-in "
        "form. Backend logs show an invalid session token being minted for "
        "these accounts.",
    ),
    # --- group B: checkout payment timeout (6 members, 1 hard) ------------
    (
        "B",
        "Checkout times out during payment",
        "Submitting an order at checkout hangs for thirty seconds and then "
        "shows a payment timeout banner. The payment service logs show the "
        "gateway request never receives a response.",
    ),
    (
        "B",
        "Payment step times out at checkout",
        "Submitting an order at checkout hangs for thirty seconds and then "
        "shows a payment timeout banner. The payment service logs show the "
        "gateway request never receives a response.",
    ),
    (
        "B",
        "Checkout payment request times out",
        "Submitting an order at checkout hangs for thirty seconds and then "
        "shows a payment timeout banner. The payment service logs show that "
        "the gateway request never receives any response.",
    ),
    (
        "B",
        "Order payment times out on submit",
        "Submitting an order at checkout hangs for thirty seconds and then "
        "shows a payment timeout banner. The payments service logs show the "
        "gateway request never receives a response.",
    ),
    (
        "B",
        "Timeout when paying at checkout",
        "Submitting an order at checkout hangs for thirty seconds and then "
        "displays a payment timeout banner. The payment service logs show the "
        "gateway request never receives a response.",
    ),
    (
        "B",  # hard member
        "Orders stuck on the pay screen",
        "Customers report that the spinner on the pay screen never finishes "
        "and the order is left in a pending state until they give up and "
        "close the tab.",
    ),
    # --- group C: profile picture upload (4 members) ----------------------
    (
        "C",
        "Profile picture upload fails for JPEG",
        "Uploading a new profile picture fails with an unsupported format "
        "message even for plain JPEG files under the size limit. The old "
        "avatar remains unchanged.",
    ),
    (
        "C",
        "Avatar upload fails with format error",
        "Uploading a new profile picture fails with an unsupported format "
        "message even for plain JPEG files under the size limit. The old "
        "avatar remains unchanged.",
    ),
    (
        "C",
        "Cannot upload new profile photo",
        "Uploading a new profile photo fails with an unsupported format "
        "message even for plain JPEG files under the size limit. The old "
        "avatar remains unchanged.",
    ),
    (
        "C",
        "Profile image upload rejects JPEG files",
        "Uploading a new profile picture fails with an unsupported format "
        "message even for ordinary JPEG files under the size limit. The old "
        "avatar remains unchanged.",
    ),
    # --- group D: dark mode persistence (3 members) -----------------------
    (
        "D",
        "Dark mode setting not persisted",
        "Enabling dark mode works for the current session but the preference "
        "is lost after logout or reload; the theme always falls back to "
        "light.",
    ),
    (
        "D",
        "Dark mode resets after reload",
        "Enabling dark mode works for the current session but the preference "
        "is lost after logout or reload; the theme always falls back to "
        "light.",
    ),
    (
        "D",
        "Theme preference lost on logout",
        "Enabling dark mode works for the current session but the choice is "
        "lost after logout or reload; the theme always falls back to light.",
    ),
    # --- group E: CSV export headers (2 members) --------------------------
    (
        "E",
        "CSV export missing column headers",
        "Exporting the transactions table to CSV produces rows without the "
        "header line, so spreadsheet imports map all of the columns wrong.",
    ),
    (
        "E",
        "Transactions CSV export lacks headers",
        "Exporting the transactions table to CSV produces rows without the "
        "header line, so spreadsheet imports map all of the columns wrong.",
    ),
    # --- group F: duplicate push notifications (2 members) ----------------
    (
        "F",
        "Duplicate push notifications on status change",
        "Every order status change sends the same push notification two or "
        "three times to the same device within a minute.",
    ),
    (
        "F",
        "Push notifications sent multiple times",
        "Every order status change sends the same push notification two or "
        "three times to the same device within a minute.",
    ),
    # --- fillers: 28 distinct items ---------------------------------------
    (None, "Add two-factor authentication",
     "Offer TOTP-based two-factor authentication at sign-in with recovery "
     "codes that can be downloaded once."),
    (None, "Dashboard loads slowly for large accounts",
     "Accounts with more than ten thousand orders wait over eight seconds "
     "for the dashboard widgets to render."),
    (None, "Add Danish translation",
     "Translate the storefront and the merchant portal into Danish and wire "
     "it into the language picker."),
    (None, "Upgrade database driver to the current LTS",
     "The bundled database driver is two major versions behind; upgrade and "
     "run the compatibility suite."),
    (None, "Order history pagination shows wrong page count",
     "The order history footer reports one page too many when the row count "
     "is an exact multiple of the page size."),
    (None, "Add webhook for order events",
     "Emit signed webhooks for order created, paid and refunded so "
     "integrators can drop polling."),
    (None, "Email receipts contain a broken logo image",
     "The receipt template references a retired CDN host, so mail clients "
     "render a broken image placeholder."),
    (None, "Support wallet payments on mobile",
     "Accept device wallet payments in the mobile apps, including the "
     "entitlement and certificate setup."),
    (None, "Search returns archived products",
     "Storefront search still lists products that were archived, leading "
     "shoppers to dead product pages."),
    (None, "Rate limit the public API",
     "Introduce per-token rate limits with standard headers so one "
     "integration cannot starve the rest."),
    (None, "Add CSV import for the product catalog",
     "Let merchants bulk-create products from a CSV file with a dry-run "
     "preview of validation problems."),
    (None, "Autosave drafts in the admin editor",
     "Persist admin editor drafts every few seconds so a crashed tab does "
     "not lose unsaved work."),
    (None, "Fix typo on the pricing page",
     "The enterprise tier says 'unlimitted seats'; correct the spelling."),
    (None, "Add audit log for admin actions",
     "Record who changed settings, prices and roles, with a filterable view "
     "for account owners."),
    (None, "Reduce bundle size of the web client",
     "The main JavaScript bundle passed two megabytes; split vendors and "
     "lazy-load the reporting views."),
    (None, "Session expires too aggressively on mobile",
     "Mobile users are signed out after a few minutes in the background and "
     "lose their cart."),
    (None, "Add sorting by discount percentage",
     "Allow sorting the promotions table by effective discount percentage, "
     "ascending and descending."),
    (None, "Crash when opening settings on older Android",
     "The settings screen crashes with a null pointer on Android 12 devices "
     "using the compact layout."),
    (None, "Coupon codes are case sensitive",
     "Customers typing a lowercase coupon code get an invalid-code error; "
     "codes should match case-insensitively."),
    (None, "Add printable packing slips",
     "Generate a printer-friendly packing slip per shipment, including "
     "gift-message handling."),
    (None, "Migrate image storage to the new bucket",
     "Move product imagery to the consolidated object-storage bucket and "
     "set redirects from the legacy URLs."),
    (None, "Inventory counts drift after bulk update",
     "Applying a bulk stock update while orders are flowing can leave the "
     "available count off by the in-flight quantity."),
    (None, "Add keyboard shortcuts to the order queue",
     "Provide shortcuts for claim, fulfill and skip so agents can work the "
     "queue without the mouse."),
    (None, "Timezone shown wrong in delivery estimates",
     "Delivery estimates render in the warehouse timezone instead of the "
     "customer's, shifting dates by a day."),
    (None, "Add privacy data export for customers",
     "Produce a machine-readable export of all personal data we hold for a "
     "customer on request."),
    (None, "Refund flow skips the confirmation dialog",
     "Triggering a refund from the order sidebar applies immediately without "
     "the usual confirmation step."),
    (None, "Monitor background job queue depth",
     "Alert when the background job queue stays above a threshold for more "
     "than five minutes."),
    (None, "Add onboarding checklist for new merchants",
     "Show a dismissible checklist that walks new merchants through payout, "
     "shipping and tax setup."),
]

PROJECT = "GRM"
BASE_DATE = datetime(2025, 3, 3, 9, 0, tzinfo=timezone.utc)


def embed_all(texts: list[str]) -> list[tuple[float, ...]]:
    return [local_hash_embed(text).values for text in texts]


def cosine(u: tuple[float, ...], v: tuple[float, ...]) -> float:
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    return dot / (nu * nv)


def main() -> int:
    keys = [f"{PROJECT}-{i}" for i in range(1, len(ISSUES) + 1)]
    assert len(ISSUES) == 51, f"need 51 issues, have {len(ISSUES)}"

    texts = [f"{summary}\n{description}" for _, summary, description in ISSUES]
    vectors = embed_all(texts)

    groups: dict[str, list[int]] = {}
    for position, (tag, _, _) in enumerate(ISSUES):
        if tag is not None:
            groups.setdefault(tag, []).append(position)

    true_pairs = set()
    for members in groups.values():
        for i, j in combinations(members, 2):
            true_pairs.add((keys[i], keys[j]))
    assert len(true_pairs) == 41, f"expected 41 true pairs, got {len(true_pairs)}"

    # independent double-loop scan
    detected: list[tuple[str, str, float]] = []
    worst_cross = 0.0
    worst_cross_pair = ("", "")
    for i, j in combinations(range(len(ISSUES)), 2):
        s = cosine(vectors[i], vectors[j])
        pair = (keys[i], keys[j])
        if s >= THRESHOLD:
            detected.append((*pair, s))
            if pair not in true_pairs:
                raise SystemExit(f"FALSE POSITIVE reachable: {pair} scores {s:.4f}")
        elif pair not in true_pairs and s > worst_cross:
            worst_cross = s
            worst_cross_pair = pair
    if worst_cross > THRESHOLD - SAFETY_GAP:
        raise SystemExit(
            f"cross pair {worst_cross_pair} scores {worst_cross:.4f}, "
            f"too close to the {THRESHOLD} cut"
        )

    detected_pairs = {(a, b) for a, b, _ in detected}
    missed = sorted(true_pairs - detected_pairs)
    print(f"true pairs: {len(true_pairs)}  detected: {len(detected_pairs)}  "
          f"missed: {len(missed)}  worst cross score: {worst_cross:.4f}")
    for pair in missed:
        print(f"  miss: {pair[0]},{pair[1]}")

    OUT_DIR.mkdir(parents=True, exist_ok=True)

    issues_json = []
    for position, (tag, summary, description) in enumerate(ISSUES):
        created = BASE_DATE + timedelta(days=position)
        issues_json.append(
            {
                "key": keys[position],
                "summary": summary,
                "description": description,
                "status": "Open",
                "labels": ["duplicate-group"] if tag else [],
                "created_at": created.isoformat().replace("+00:00", "Z"),
                "updated_at": created.isoformat().replace("+00:00", "Z"),
                "comments": [],
            }
        )
    backlog = {"project_key": PROJECT, "issues": issues_json}
    (OUT_DIR / "demo_backlog.json").write_text(
        json.dumps(backlog, indent=2) + "\n", encoding="utf-8"
    )

    truth_lines = [f"#n={len(ISSUES)}", "issue_a,issue_b"]
    for a, b in sorted(min(p, (p[1], p[0])) for p in true_pairs):
        truth_lines.append(f"{a},{b}")
    (OUT_DIR / "demo_truth.csv").write_text("\n".join(truth_lines) + "\n", encoding="utf-8")

    scan = {
        "threshold": THRESHOLD,
        "pairs": [
            {"a": min(a, b), "b": max(a, b), "score": s}
            for a, b, s in sorted(detected, key=lambda t: (-t[2], min(t[0], t[1]), max(t[0], t[1])))
        ],
    }
    (OUT_DIR / "expected_scan.json").write_text(
        json.dumps(scan, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote fixture files to {OUT_DIR}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
