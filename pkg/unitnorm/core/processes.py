"""
Module :module:`unitnorm.core.processes` provides an ancestor for worker
processes and a pool which distributes independent tasks among them.
"""

import ctypes
import logging
import multiprocessing
import os
import queue
import signal
import time

import setproctitle

from unitnorm.core.exceptions import ProcessError

__all__ = ['BaseProcess', 'TaskWorker', 'WorkerPool']


class BaseProcess(multiprocessing.Process):
    """
    Ancestor for worker processes. Adjust :attribute:`interval` attribute
    and override method :meth:`loop` which is repeatedly called every
    :attribute:`interval` seconds. *process_type* is passed to
    :meth:`unitnorm.core.context.Context.initialize_child`.
    """

    interval = 0
    """
    Interval in seconds. After this time :meth:`loop` method is
    repeatedly called.
    """

    process_type = None

    def __init__(self, context):
        super(BaseProcess, self).__init__()

        self._parent_pid = os.getpid()
        self._ready = multiprocessing.Value(ctypes.c_bool, False)
        self._stop_event = multiprocessing.Event()

        self.context = context
        self.logger = logging.getLogger(
            "{:s}.{:s}".format(__name__, self.__class__.__name__))

        self.initialize()

    def initialize(self):
        """
        Initialize instance attributes. You can override this method in
        the subclasses.
        """
        pass

    @property
    def ready(self):
        """
        :const:`True` when worker process has been started successfully,
        else :const:`False`.
        """
        return self._ready.value

    def check_exit(self):
        """
        Return :const:`True` if process should exit, else :const:`False`.
        Process should exit if pid of the parent process has changed
        (parent process has exited and init is new parent) or if stop
        flag is set.
        """
        if os.getppid() != self._parent_pid or self._stop_event.is_set():
            return True
        return False

    def stop(self):
        """
        Set stop flag. :meth:`run` method checks this flag and if it is
        :const:`True`, worker process will be stopped.
        """
        self._stop_event.set()

    def run(self):
        """
        Child process. Repeatedly call :meth:`loop` method every
        :attribute:`interval` seconds.
        """
        setproctitle.setproctitle("{:s}: {:s}".format(
            self.context.config.name, self.__class__.__name__))
        self.logger.info(
            "Worker '%s' has been started with pid %d",
            self.__class__.__name__, os.getpid())

        # Register SIGINT handler which will exit worker process
        def sigint_handler(unused_signum, unused_frame):
            """
            Exit worker process when SIGINT is reached.
            """
            self.stop()
        signal.signal(signal.SIGINT, sigint_handler)

        # Initialize logging
        self.context.config.configure_logging()
        # Initialize child
        self.context.initialize_child(self.process_type, process=self)

        next_loop_time = 0
        while 1:
            if self.check_exit():
                break
            if time.time() >= next_loop_time:
                try:
                    self.loop()
                except Exception:
                    self.logger.exception(
                        "Worker '%s' failed", self.__class__.__name__)
                else:
                    if not next_loop_time and not self.ready:
                        self._ready.value = True
                next_loop_time = time.time() + self.interval
            else:
                time.sleep(0.25)

    def loop(self):
        """
        Repeatedly in interval :attribute:`interval` do code in this
        method. It is an abstract method, override it in subclasses.
        """
        raise NotImplementedError


class TaskWorker(BaseProcess):
    """
    Worker which takes ``(index, payload)`` tasks from *tasks* queue and
    puts ``(index, result, error)`` into *results* queue. :const:`None`
    task stops the worker. Override :meth:`process`.
    """

    def __init__(self, context, tasks, results, **options):
        self.tasks = tasks
        self.results = results
        self.options = options
        super(TaskWorker, self).__init__(context)

    def loop(self):
        try:
            task = self.tasks.get(timeout=0.25)
        except queue.Empty:
            return
        if task is None:
            self.stop()
            return
        index, payload = task
        try:
            result = self.process(payload)
        except Exception as e:
            self.logger.exception("Task %d failed", index)
            self.results.put(
                (index, None, "{}: {}".format(e.__class__.__name__, e)))
        else:
            self.results.put((index, result, None))

    def process(self, payload):
        raise NotImplementedError


class WorkerPool(object):
    """
    Run *workers* processes of *worker_class* (a :class:`TaskWorker`
    subclass constructed with *options*) and distribute payloads among
    them. Results keep order of the payloads.
    """

    def __init__(self, context, worker_class, workers, timeout=3600.0,
                 **options):
        if workers < 1:
            raise ValueError("Number of workers must be >= 1, got %r"
                             % workers)
        self.context = context
        self.worker_class = worker_class
        self.workers = workers
        self.timeout = timeout
        self.options = options
        self.logger = logging.getLogger(
            "{:s}.{:s}".format(__name__, self.__class__.__name__))

    def map(self, payloads):
        """
        Process all *payloads*, return list of ``(result, error)`` pairs.
        Raise :exc:`ProcessError` when a worker dies or results do not
        arrive in time.
        """
        payloads = list(payloads)
        tasks = multiprocessing.Queue()
        results = multiprocessing.Queue()
        processes = [
            self.worker_class(self.context, tasks, results, **self.options)
            for _ in range(min(self.workers, max(len(payloads), 1)))]
        for process in processes:
            process.start()
        self.logger.info("Started %d worker(s) for %d task(s)",
                         len(processes), len(payloads))
        try:
            for task in enumerate(payloads):
                tasks.put(task)
            for _ in processes:
                tasks.put(None)
            collected = {}
            deadline = time.time() + self.timeout
            while len(collected) < len(payloads):
                try:
                    index, result, error = results.get(timeout=1.0)
                except queue.Empty:
                    if time.time() > deadline:
                        raise ProcessError("Workers did not finish in time")
                    if not any(p.is_alive() for p in processes):
                        raise ProcessError(
                            "All workers exited, %d task(s) unfinished"
                            % (len(payloads) - len(collected)))
                    continue
                collected[index] = (result, error)
        finally:
            for process in processes:
                process.stop()
            for process in processes:
                process.join(5.0)
                if process.is_alive():
                    process.terminate()
        return [collected[i] for i in range(len(payloads))]
