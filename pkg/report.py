import sys

import ledger


def _num(value, fmt):
    return "-" if value is None else format(value, fmt)


def main(argv=None):
    args = sys.argv[1:] if argv is None else argv
    model = args[0] if args else None
    ledger.init_db()
    rows = ledger.fetch_runs(model)
    source = "Postgres" if ledger.using_postgres() else f"SQLite ({ledger.DB_PATH})"
    if not rows:
        print(f"No runs stored in {source}.")
        return 0

    print(f"{len(rows)} runs in {source}")
    group = None
    for r in rows:
        key = (r["model"], r["variation"])
        if key != group:
            group = key
            print(f"\n─── {r['model']} / {r['variation']} ───")
            print(f"{'name':<24} {'algorithm':<8} {'order':>5} {'delta':>8} {'diam I':>10} {'diam x':>10} "
                  f"{'time[s]':>8} {'eps':>7} {'t_c[ms]':>8} {'v_r[mm/s]':>9}")
        diam = r["final_diameters"]
        t_c = None if r["t_c"] is None else r["t_c"] * 1e3
        v_r = None if r["v_r"] is None else r["v_r"] * 1e3
        order = "inf" if r["max_order"] is None else f"{r['max_order']:g}"
        eps = _num(r["epsilon"], ".3g")
        if r["verified"] is False:
            eps += " (!)"
        print(f"{r['name']:<24} {r['algorithm']:<8} {order:>5} {r['delta']:>8.0e} "
              f"{_num(diam.get('I', diam.get('x')), '10.4g')} {_num(diam.get('x'), '10.4g')} "
              f"{_num(r['runtime'], '8.3f')} {eps:>7} {_num(t_c, '8.2f')} {_num(v_r, '9.3f')}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
