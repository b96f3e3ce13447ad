import json
import os
import sqlite3
from datetime import datetime, timezone

try:
    import psycopg  # type: ignore
except Exception:
    psycopg = None

# ── Config ──────────────────────────────────────────────────────────────────
DATABASE_URL = os.getenv("DATABASE_URL")
DB_PATH = os.getenv("DB_PATH", "results.db")

COLUMNS = (
    "name", "model", "variation", "algorithm", "zeta", "delta", "max_order", "splits",
    "final_diameters", "epsilon", "t_c", "v_r", "verified", "runtime", "added_at",
)


# ── DB helpers ───────────────────────────────────────────────────────────────

def using_postgres():
    """Postgres needs both DATABASE_URL and an importable psycopg; anything less falls back to SQLite."""
    return bool(DATABASE_URL) and psycopg is not None


def pg_connect():
    if psycopg is None:
        raise RuntimeError("psycopg not installed. Add psycopg[binary] to requirements.txt")
    conn = psycopg.connect(DATABASE_URL, connect_timeout=5)
    conn.autocommit = True
    return conn


def sqlite_connect():
    return sqlite3.connect(DB_PATH)


def init_db():
    if using_postgres():
        with pg_connect() as conn:
            with conn.cursor() as c:
                c.execute("""
                    CREATE TABLE IF NOT EXISTS public.runs (
                        id              SERIAL PRIMARY KEY,
                        name            TEXT,
                        model           TEXT,
                        variation       TEXT,
                        algorithm       TEXT,
                        zeta            TEXT,
                        delta           DOUBLE PRECISION,
                        max_order       DOUBLE PRECISION,
                        splits          INTEGER,
                        final_diameters TEXT,
                        epsilon         DOUBLE PRECISION,
                        t_c             DOUBLE PRECISION,
                        v_r             DOUBLE PRECISION,
                        verified        BOOLEAN,
                        runtime         DOUBLE PRECISION,
                        added_at        TIMESTAMPTZ
                    );
                """)
                c.execute("CREATE INDEX IF NOT EXISTS runs_model_idx ON public.runs (model, variation, added_at DESC);")
        return
    conn = sqlite_connect()
    c = conn.cursor()
    c.execute("""
        CREATE TABLE IF NOT EXISTS runs (
            id              INTEGER PRIMARY KEY AUTOINCREMENT,
            name            TEXT,
            model           TEXT,
            variation       TEXT,
            algorithm       TEXT,
            zeta            TEXT,
            delta           REAL,
            max_order       REAL,
            splits          INTEGER,
            final_diameters TEXT,
            epsilon         REAL,
            t_c             REAL,
            v_r             REAL,
            verified        INTEGER,
            runtime         REAL,
            added_at        TEXT
        );
    """)
    c.execute("CREATE INDEX IF NOT EXISTS runs_model_idx ON runs (model, variation, added_at DESC);")
    conn.commit()
    conn.close()


def _row(metrics):
    req = metrics.get("requirement") or {}
    order = metrics.get("max_order")
    verified = req.get("verified")
    return (
        metrics["name"],
        metrics["model"],
        metrics.get("variation", "none"),
        metrics["algorithm"],
        json.dumps(metrics.get("zeta")),
        metrics["delta"],
        None if order in (None, "inf") else float(order),
        metrics.get("splits", 1),
        json.dumps({k[len("final_diameter_"):]: v for k, v in metrics.items() if k.startswith("final_diameter_")}),
        req.get("epsilon"),
        req.get("t_c"),
        req.get("v_r"),
        None if verified is None else bool(verified),
        metrics.get("runtime"),
    )


def record_run(metrics):
    """Store one analysed scenario; returns the new row id or None on failure."""
    added_at = datetime.now(timezone.utc)
    names = ", ".join(COLUMNS)
    try:
        values = _row(metrics)
        if using_postgres():
            with pg_connect() as conn:
                with conn.cursor() as c:
                    c.execute(
                        f"INSERT INTO public.runs ({names}) VALUES ({', '.join(['%s'] * len(COLUMNS))}) RETURNING id;",
                        values + (added_at,),
                    )
                    row = c.fetchone()
                    return row[0] if row else None
        conn = sqlite_connect()
        cur = conn.cursor()
        cur.execute(
            f"INSERT INTO runs ({names}) VALUES ({', '.join(['?'] * len(COLUMNS))});",
            values + (added_at.isoformat(),),
        )
        conn.commit()
        new_id = cur.lastrowid
        conn.close()
        return new_id
    except Exception as e:
        print(f"[DB] could not record '{metrics.get('name')}': {e}")
        return None


def fetch_runs(model=None):
    """All stored rows as dicts, newest last; optionally for one model."""
    names = ", ".join(COLUMNS)
    if using_postgres():
        where, params = ("WHERE model = %s", (model,)) if model else ("", ())
        with pg_connect() as conn:
            with conn.cursor() as c:
                c.execute(f"SELECT {names} FROM public.runs {where} ORDER BY id;", params)
                rows = c.fetchall()
    else:
        where, params = ("WHERE model = ?", (model,)) if model else ("", ())
        conn = sqlite_connect()
        rows = conn.execute(f"SELECT {names} FROM runs {where} ORDER BY id;", params).fetchall()
        conn.close()
    out = []
    for row in rows:
        rec = dict(zip(COLUMNS, row))
        rec["final_diameters"] = json.loads(rec["final_diameters"] or "{}")
        rec["zeta"] = json.loads(rec["zeta"] or "null")
        if rec["verified"] is not None:
            rec["verified"] = bool(rec["verified"])
        out.append(rec)
    return out
