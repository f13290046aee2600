# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

"""Survival COBRA ensembles scored by the censored integrated Brier score."""

__version__ = "1.0.0"
