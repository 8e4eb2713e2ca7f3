from django.core.management.base import BaseCommand, CommandError

from apps.experiments.utils import add_experiment_arguments, run_experiment, spec_from_options


class Command(BaseCommand):
    help = 'تشغيل نسخ المحلل على مجموعة بيانات وكتابة سجل CSV لكل (نسخة، بذرة) مع summary.csv'

    def add_arguments(self, parser):
        add_experiment_arguments(parser)

    def handle(self, *args, **options):
        spec = spec_from_options(options)
        code = run_experiment(spec)
        if code:
            raise CommandError(f'run_experiment finished with errors, see {spec.out_dir}', returncode=code)
        self.stdout.write(self.style.SUCCESS(
            f'{spec.run_count()} runs written to {spec.out_dir}'
        ))
