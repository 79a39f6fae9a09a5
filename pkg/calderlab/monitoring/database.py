"""SQLite history of experiment runs and their performance metrics."""
import json
import sqlite3
import threading
from pathlib import Path
from typing import Any, Dict, List, Optional
import logging

from .models import PerformanceMetrics, RunManifest


class RunHistory:
    """Stores run manifests and per-function performance metrics."""

    def __init__(self, db_path: str):
        self.db_path = str(db_path)
        self._lock = threading.RLock()
        self.logger = logging.getLogger(__name__)
        self._init_database()

    def _connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self.db_path)

    def _init_database(self) -> None:
        with self._lock:
            Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)
            conn = self._connect()
            try:
                conn.execute('''
                    CREATE TABLE IF NOT EXISTS runs (
                        id INTEGER PRIMARY KEY AUTOINCREMENT,
                        run_id TEXT NOT NULL,
                        experiment TEXT NOT NULL,
                        started_at TEXT NOT NULL,
                        duration REAL,
                        passed INTEGER NOT NULL,
                        failures TEXT,
                        manifest TEXT NOT NULL,
                        created_at TEXT DEFAULT CURRENT_TIMESTAMP
                    )
                ''')
                conn.execute('''
                    CREATE TABLE IF NOT EXISTS performance_metrics (
                        id INTEGER PRIMARY KEY AUTOINCREMENT,
                        timestamp TEXT NOT NULL,
                        function_name TEXT NOT NULL,
                        execution_time REAL NOT NULL,
                        memory_peak INTEGER NOT NULL,
                        cpu_usage REAL DEFAULT 0.0,
                        success_rate REAL DEFAULT 1.0,
                        run_id TEXT,
                        created_at TEXT DEFAULT CURRENT_TIMESTAMP
                    )
                ''')
                conn.execute('CREATE INDEX IF NOT EXISTS idx_runs_experiment ON runs(experiment)')
                conn.execute('CREATE INDEX IF NOT EXISTS idx_runs_started ON runs(started_at)')
                conn.execute('CREATE INDEX IF NOT EXISTS idx_perf_function ON performance_metrics(function_name)')
                conn.commit()
            except Exception as e:
                self.logger.error(f"Error initializing run history: {e}")
                conn.rollback()
                raise
            finally:
                conn.close()

    def insert_run(self, manifest: RunManifest) -> None:
        with self._lock:
            conn = self._connect()
            try:
                conn.execute('''
                    INSERT INTO runs (run_id, experiment, started_at, duration, passed, failures, manifest)
                    VALUES (?, ?, ?, ?, ?, ?, ?)
                ''', (
                    manifest.run_id, manifest.experiment, manifest.started_at.isoformat(),
                    manifest.duration, int(manifest.passed), json.dumps(manifest.failures),
                    manifest.to_json()
                ))
                conn.commit()
            except Exception as e:
                self.logger.error(f"Error inserting run {manifest.run_id}: {e}")
                conn.rollback()
                raise
            finally:
                conn.close()

    def insert_performance_metrics(self, metrics: PerformanceMetrics) -> None:
        with self._lock:
            conn = self._connect()
            try:
                data = metrics.to_dict()
                conn.execute('''
                    INSERT INTO performance_metrics
                    (timestamp, function_name, execution_time, memory_peak, cpu_usage, success_rate, run_id)
                    VALUES (?, ?, ?, ?, ?, ?, ?)
                ''', (
                    data['timestamp'], data['function_name'], data['execution_time'],
                    data['memory_peak'], data['cpu_usage'], data['success_rate'], data['run_id']
                ))
                conn.commit()
            except Exception as e:
                self.logger.error(f"Error inserting performance metrics: {e}")
                conn.rollback()
                raise
            finally:
                conn.close()

    def query_runs(self, experiment: Optional[str] = None, limit: Optional[int] = None) -> List[RunManifest]:
        """Most recent runs first."""
        with self._lock:
            conn = self._connect()
            conn.row_factory = sqlite3.Row
            try:
                query = "SELECT manifest FROM runs WHERE 1=1"
                params: List[Any] = []
                if experiment:
                    query += " AND experiment = ?"
                    params.append(experiment)
                query += " ORDER BY id DESC"
                if limit:
                    query += " LIMIT ?"
                    params.append(limit)
                rows = conn.execute(query, params).fetchall()
                return [RunManifest.from_dict(json.loads(row['manifest'])) for row in rows]
            except Exception as e:
                self.logger.error(f"Error querying runs: {e}")
                raise
            finally:
                conn.close()

    def query_performance_metrics(self, function_name: Optional[str] = None) -> List[PerformanceMetrics]:
        with self._lock:
            conn = self._connect()
            conn.row_factory = sqlite3.Row
            try:
                query = "SELECT * FROM performance_metrics WHERE 1=1"
                params: List[Any] = []
                if function_name:
                    query += " AND function_name = ?"
                    params.append(function_name)
                query += " ORDER BY id DESC"
                rows = conn.execute(query, params).fetchall()
                return [PerformanceMetrics.from_dict(dict(row)) for row in rows]
            except Exception as e:
                self.logger.error(f"Error querying performance metrics: {e}")
                raise
            finally:
                conn.close()

    def get_database_stats(self) -> Dict[str, int]:
        with self._lock:
            conn = self._connect()
            try:
                runs = conn.execute("SELECT COUNT(*) FROM runs").fetchone()[0]
                failed = conn.execute("SELECT COUNT(*) FROM runs WHERE passed = 0").fetchone()[0]
                metrics = conn.execute("SELECT COUNT(*) FROM performance_metrics").fetchone()[0]
                return {'runs_count': runs, 'failed_runs_count': failed, 'performance_metrics_count': metrics}
            finally:
                conn.close()
