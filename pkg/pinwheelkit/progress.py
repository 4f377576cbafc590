from threading import Lock
from threading import Timer


class ProgressTimer:
    """Calls `function` every `interval` seconds on a daemon thread until stopped."""

    def __init__(self, interval, function, *args, **kwargs):
        self._timer = None
        self._lock = Lock()

        self.interval = interval
        self.function = function
        self.args = args
        self.kwargs = kwargs

        self.ticks = 0
        self.is_running = False

    def _run(self):
        with self._lock:
            if not self.is_running:
                return
            self._schedule()

        self.ticks += 1
        self.function(*self.args, **self.kwargs)

    def _schedule(self):
        self._timer = Timer(self.interval, self._run)
        self._timer.daemon = True
        self._timer.start()

    def start(self):
        if self.interval is None or self.interval <= 0:
            return

        with self._lock:
            if not self.is_running:
                self.is_running = True
                self._schedule()

    def stop(self):
        with self._lock:
            self.is_running = False
            if self._timer is not None:
                self._timer.cancel()
