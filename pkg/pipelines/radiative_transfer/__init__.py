# -*- coding: utf-8 -*-
"""
This module imports the flows of the 'pipelines.radiative_transfer' project.
"""

from pipelines.radiative_transfer.audit.flows import *  # noqa
from pipelines.radiative_transfer.rate_study.flows import *  # noqa
from pipelines.radiative_transfer.run_kinetic.flows import *  # noqa
from pipelines.radiative_transfer.run_limit.flows import *  # noqa
from pipelines.radiative_transfer.selftest.flows import *  # noqa
