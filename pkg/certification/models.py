from django.db import models


class GainCertificate(models.Model):
    scenario = models.CharField(max_length=100)
    config_path = models.CharField(max_length=500, blank=True)
    passed = models.BooleanField(default=False)
    lambda_V = models.FloatField()
    D = models.FloatField()
    ultimate_bound = models.FloatField(null=True, blank=True)  # None when lambda_V <= 0
    failing = models.CharField(max_length=500, blank=True)  # comma separated condition names
    report = models.JSONField(default=dict)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['scenario', 'created_at'], name='cert_scenario_idx'),
        ]

    def __str__(self):
        verdict = 'pass' if self.passed else 'fail'
        return f"{self.scenario}: {verdict}"

    @property
    def failing_conditions(self):
        return [name for name in self.failing.split(',') if name]
