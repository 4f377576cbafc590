schema = {
    'certificates': """
    CREATE TABLE IF NOT EXISTS certificates
    (
        spec                        TEXT NOT NULL,
        kind                        TEXT NOT NULL,
        periods                     TEXT NOT NULL,
        jobs                        INTEGER NOT NULL,
        verdict                     TEXT NOT NULL,
        solver                      TEXT,
        cycle_length                INTEGER,
        elapsed                     DOUBLE,
        states                      BIGINT,
        PRIMARY KEY ( spec, periods )
    )
    """
}

summary = """
    SELECT
        spec,
        verdict,
        solver,
        COUNT(*) AS members,
        MAX(jobs) AS max_jobs,
        MAX(cycle_length) AS max_cycle_length,
        SUM(elapsed) AS total_seconds,
        MAX(elapsed) AS max_seconds
    FROM certificates
    GROUP BY spec, verdict, solver
    ORDER BY spec, verdict, solver
"""
